import logging
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np
from numpy.typing import ArrayLike, NDArray

from app.domain.constants import CG_MAX_ITERS_SLACK, CG_RESIDUAL_TOL
from app.domain.errors import CgBreakdownError, CgNonConvergenceError, DimensionMismatchError
from app.infrastructure.linalg.dense import DenseVector, as_matrix, as_vector, gram_matvec

"""
Gradiente conjugado sobre la ecuación normal AAᵀβ = z.

Sigue la iteración clásica (r_0 = AAᵀx_0 − z, p_0 = −r_0) en float64.
La variante por lotes resuelve K sistemas independientes en paralelo: cada
sistema lleva su propio α_k/β_k y se congela al converger.
"""

_logger = logging.getLogger(__name__)

GramOperator = Callable[[NDArray[np.float64]], NDArray[np.float64]]


@dataclass(frozen=True)
class CgConfig:
    """
    Controles de terminación.

    max_iters=None significa filas + CG_MAX_ITERS_SLACK.
    La tolerancia es relativa: ‖AAᵀβ − z‖ ≤ residual_tol·max(1, ‖z‖).
    """

    max_iters: int | None = None
    residual_tol: float = CG_RESIDUAL_TOL
    initial_guess: DenseVector | None = None

    def __post_init__(self):
        if self.max_iters is not None and self.max_iters < 1:
            raise ValueError("max_iters debe ser >= 1")
        if not self.residual_tol >= 0:
            raise ValueError("residual_tol debe ser >= 0")

    def iteration_limit(self, rows: int) -> int:
        return self.max_iters if self.max_iters is not None else rows + CG_MAX_ITERS_SLACK


@dataclass(frozen=True)
class CgResult:
    beta_star: DenseVector
    iters: int
    final_residual_norm: float
    iterations: NDArray[np.int64] = field(repr=False)

    def __iter__(self) -> Iterator:
        return iter((self.beta_star, self.iters, self.final_residual_norm))


def batched_conjugate_gradient(gram: GramOperator, Z: ArrayLike, cfg: CgConfig | None = None) -> CgResult:
    """
    Resuelve K sistemas (AAᵀ)_k β_k = z_k a la vez.

    `gram` recibe una matriz (K, m) y devuelve la acción fila a fila de cada AAᵀ_k;
    nunca se materializa AAᵀ. Lanza CgBreakdownError si pᵀAAᵀp ≤ eps·‖p‖² con
    residuo por encima de la tolerancia, y CgNonConvergenceError si se agota max_iters.
    """

    cfg = cfg or CgConfig()
    Z = np.atleast_2d(as_vector(Z, "z"))
    K, m = Z.shape

    if cfg.initial_guess is not None:
        X = np.broadcast_to(as_vector(cfg.initial_guess, "initial_guess"), (K, m)).copy()
        R = gram(X) - Z
    else:
        X = np.zeros((K, m))
        R = -Z.copy()
    P = -R
    rr = np.einsum("km,km->k", R, R)

    scale = np.maximum(1.0, np.linalg.norm(Z, axis=1))
    tol2 = (cfg.residual_tol * scale) ** 2
    active = rr > tol2
    iterations = np.zeros(K, dtype=np.int64)
    limit = cfg.iteration_limit(m)
    machine_eps = np.finfo(np.float64).eps

    k = 0
    while k < limit and active.any():
        GP = gram(P)
        pAp = np.einsum("km,km->k", P, GP)
        pp = np.einsum("km,km->k", P, P)
        broken = active & (pAp <= machine_eps * pp)
        if broken.any():
            raise CgBreakdownError(float(np.sqrt(rr[broken].max())), k)

        alpha = np.where(active, rr / np.where(active, pAp, 1.0), 0.0)
        X += alpha[:, None] * P
        R += alpha[:, None] * GP
        rr_next = np.einsum("km,km->k", R, R)
        beta = np.where(active, rr_next / np.where(rr > 0, rr, 1.0), 0.0)
        P = np.where(active[:, None], -R + beta[:, None] * P, P)
        rr = np.where(active, rr_next, rr)

        iterations += active
        active &= rr > tol2
        k += 1

    if active.any():
        raise CgNonConvergenceError(float(np.sqrt(rr[active].max())), k)

    residual = float(np.sqrt(rr.max())) if K else 0.0
    _logger.debug("CG: %d sistemas, %d iteraciones máx., residuo %.3e", K, k, residual)
    return CgResult(
        beta_star=X,
        iters=int(iterations.max()) if K else 0,
        final_residual_norm=residual,
        iterations=iterations,
    )


def conjugate_gradient(A: ArrayLike, z: ArrayLike, cfg: CgConfig | None = None) -> CgResult:
    """
    β* tal que AAᵀβ* = z, para z en im(A).

    z de forma (m,) devuelve β* (m,); z de forma (S, m) resuelve S sistemas con la misma A.
    Con guess inicial cero converge a la solución de norma mínima en im(AAᵀ).
    """

    A = as_matrix(A)
    z = as_vector(z, "z")
    if A.shape[0] != z.shape[-1]:
        raise DimensionMismatchError("conjugate_gradient", A.shape, z.shape)

    result = batched_conjugate_gradient(lambda Y: gram_matvec(A, Y), z, cfg)
    if z.ndim == 1:
        return CgResult(
            beta_star=result.beta_star[0],
            iters=result.iters,
            final_residual_norm=result.final_residual_norm,
            iterations=result.iterations,
        )
    return result
