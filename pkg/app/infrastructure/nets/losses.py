import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import log_softmax, softmax

from app.domain.errors import DimensionMismatchError
from app.infrastructure.linalg.dense import DenseMatrix, DenseVector
from app.infrastructure.nets.network import BayesianMLP, ForwardTape, kl_total

"""
Pérdida ELBO con escalado de minibatch:

    ℓ = (N/B)·Σ_batch NLL(y | f(x, v)) + Σ_capas KL(q_θ ‖ N(0, I))

Sólo el término NLL pasa por los estimadores; la KL se deriva en forma cerrada
(ver network.kl_gradient).
"""

_LOG_2PI = math.log(2.0 * math.pi)


class LossKind(str, Enum):
    SOFTMAX_NLL = "softmax_nll"
    GAUSSIAN_NLL = "gaussian_nll"
    QUADRATIC = "quadratic"


@dataclass(frozen=True)
class LossSpec:
    kind: LossKind = LossKind.SOFTMAX_NLL
    minibatch_scale: float = 1.0
    obs_noise: float = 1.0
    kl_weight: float = 1.0

    def __post_init__(self):
        if not self.minibatch_scale >= 1.0:
            raise ValueError(f"minibatch_scale debe ser >= 1 (recibido {self.minibatch_scale})")
        if not self.obs_noise > 0.0:
            raise ValueError("obs_noise debe ser > 0")

    @classmethod
    def for_minibatch(cls, kind: LossKind, n_data: int, batch_size: int, obs_noise: float = 1.0) -> "LossSpec":
        return cls(kind=kind, minibatch_scale=n_data / batch_size, obs_noise=obs_noise)


@dataclass(frozen=True)
class Batch:
    inputs: DenseMatrix
    targets: np.ndarray

    def __post_init__(self):
        if len(self.inputs) != len(self.targets):
            raise DimensionMismatchError("Batch", (len(self.inputs),), (len(self.targets),))

    @property
    def size(self) -> int:
        return len(self.inputs)


def _regression_targets(outputs: DenseMatrix, targets: np.ndarray) -> DenseMatrix:
    y = np.asarray(targets, dtype=np.float64)
    if y.ndim == 1:
        y = y[:, None]
    if y.shape != outputs.shape:
        raise DimensionMismatchError("targets", outputs.shape, y.shape)
    return y


def nll_and_grad(outputs: DenseMatrix, targets: np.ndarray, spec: LossSpec) -> tuple[DenseVector, DenseMatrix]:
    """NLL por ejemplo (B,) y su gradiente respecto a las salidas (B, out), sin escalar."""

    if spec.kind is LossKind.SOFTMAX_NLL:
        labels = np.asarray(targets, dtype=np.int64)
        if labels.shape != (outputs.shape[0],):
            raise DimensionMismatchError("labels", (outputs.shape[0],), labels.shape)
        rows = np.arange(outputs.shape[0])
        nll = -log_softmax(outputs, axis=1)[rows, labels]
        grad = softmax(outputs, axis=1)
        grad[rows, labels] -= 1.0
        return nll, grad

    y = _regression_targets(outputs, targets)
    resid = outputs - y
    if spec.kind is LossKind.QUADRATIC:
        return 0.5 * np.sum(resid * resid, axis=1), resid
    s2 = spec.obs_noise ** 2
    nll = np.sum(0.5 * (_LOG_2PI + math.log(s2)) + resid * resid / (2.0 * s2), axis=1)
    return nll, resid / s2


def elbo_loss(
    net: BayesianMLP, batch: Batch, tape: ForwardTape, loss_spec: LossSpec
) -> tuple[float, DenseMatrix]:
    """(pérdida escalar, ∂(N/B·ΣNLL)/∂salidas); el gradiente KL se suma aparte."""

    outputs = tape.outputs
    if outputs.shape[0] != batch.size:
        raise DimensionMismatchError("elbo_loss", (batch.size,), outputs.shape)
    nll, grad = nll_and_grad(outputs, batch.targets, loss_spec)
    scale = loss_spec.minibatch_scale
    loss = scale * float(np.sum(nll)) + loss_spec.kl_weight * kl_total(net)
    return loss, scale * grad


def accuracy(outputs: DenseMatrix, targets: np.ndarray, kind: LossKind) -> float:
    """Fracción de aciertos (clasificación) o 1 − RMSE acotado a [0, 1] (regresión)."""

    if kind is LossKind.SOFTMAX_NLL:
        return float(np.mean(np.argmax(outputs, axis=1) == np.asarray(targets)))
    y = _regression_targets(outputs, targets)
    rmse = float(np.sqrt(np.mean((outputs - y) ** 2)))
    return max(0.0, 1.0 - rmse)
