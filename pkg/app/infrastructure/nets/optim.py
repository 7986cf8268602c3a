from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from app.domain.constants import ADAM_BETA1, ADAM_BETA2, ADAM_EPS
from app.domain.errors import DimensionMismatchError, NonFiniteGradientError
from app.infrastructure.linalg.dense import DenseVector


class OptimizerKind(str, Enum):
    ADAM = "adam"
    SGD = "sgd"


@dataclass(frozen=True)
class AdamState:
    lr: float
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS
    step: int = 0
    m: DenseVector | None = None
    v: DenseVector | None = None


@dataclass(frozen=True)
class SgdState:
    lr: float
    step: int = 0


def _check(params: DenseVector, grad: DenseVector, step: int):
    if params.shape != grad.shape:
        raise DimensionMismatchError("optimizer", params.shape, grad.shape)
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradientError(step)


def adam_step(params: DenseVector, grad: DenseVector, state: AdamState) -> tuple[DenseVector, AdamState]:
    """Adam con corrección de sesgo; devuelve parámetros y estado nuevos sin mutar los de entrada."""

    _check(params, grad, state.step + 1)
    m = np.zeros_like(params) if state.m is None else state.m
    v = np.zeros_like(params) if state.v is None else state.v
    t = state.step + 1
    m = state.beta1 * m + (1.0 - state.beta1) * grad
    v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_params = params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_params, replace(state, step=t, m=m, v=v)


def sgd_step(params: DenseVector, grad: DenseVector, state: SgdState) -> tuple[DenseVector, SgdState]:
    _check(params, grad, state.step + 1)
    return params - state.lr * grad, replace(state, step=state.step + 1)


def init_optimizer(kind: OptimizerKind, lr: float) -> AdamState | SgdState:
    return AdamState(lr=lr) if kind is OptimizerKind.ADAM else SgdState(lr=lr)


def optimizer_step(params: DenseVector, grad: DenseVector, state: AdamState | SgdState):
    if isinstance(state, AdamState):
        return adam_step(params, grad, state)
    return sgd_step(params, grad, state)
