import logging
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

from app.domain.constants import JACOBI_MAX_SWEEPS, PINV_EIG_RTOL
from app.domain.errors import ConfigError, DimensionMismatchError, NumericError, OracleNonConvergenceError
from app.infrastructure.estimators.site import LinearMapContext
from app.infrastructure.linalg.dense import DenseMatrix, DenseVector, as_matrix, as_vector

"""
Oráculos de fuerza bruta para contrastar el camino CG y los estimadores:

- PinvOracle: (AAᵀ)† por eigendescomposición de Jacobi cíclica.
- solve_gaussian_elimination: solve directo con pivoteo parcial.
- QuadraticOracle: gradiente analítico de E[½zᵀHz + bᵀz] con z = W(μ + Σ^{1/2}ε).
"""

_logger = logging.getLogger(__name__)


def jacobi_eigh(S: ArrayLike, max_sweeps: int = JACOBI_MAX_SWEEPS) -> tuple[DenseVector, DenseMatrix, int]:
    """
    Eigendescomposición de una matriz simétrica por rotaciones de Jacobi.

    Devuelve (autovalores, autovectores por columna, barridos usados).
    Lanza OracleNonConvergenceError si no converge en max_sweeps barridos.
    """

    S = as_matrix(S, "S").copy()
    m = S.shape[0]
    if S.shape != (m, m):
        raise DimensionMismatchError("jacobi_eigh", S.shape, (m, m))
    V = np.eye(m)
    scale = max(float(np.linalg.norm(S)), np.finfo(np.float64).tiny)

    for sweep in range(max_sweeps + 1):
        off = float(np.linalg.norm(S - np.diag(np.diag(S))))
        if off <= 1e-14 * scale:
            return np.diag(S).copy(), V, sweep
        if sweep == max_sweeps:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = S[p, q]
                if abs(apq) <= 1e-18 * scale:
                    continue
                theta = (S[q, q] - S[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                Sp, Sq = S[:, p].copy(), S[:, q].copy()
                S[:, p], S[:, q] = c * Sp - s * Sq, s * Sp + c * Sq
                Rp, Rq = S[p, :].copy(), S[q, :].copy()
                S[p, :], S[q, :] = c * Rp - s * Rq, s * Rp + c * Rq
                Vp, Vq = V[:, p].copy(), V[:, q].copy()
                V[:, p], V[:, q] = c * Vp - s * Vq, s * Vp + c * Vq

    raise OracleNonConvergenceError(f"Jacobi no convergió en {max_sweeps} barridos (off-diagonal {off:.3e})")


@dataclass(frozen=True)
class PinvOracle:
    """(AAᵀ)† denso; invierte autovalores por encima de PINV_EIG_RTOL·λ_max."""

    A: DenseMatrix
    gram: DenseMatrix = field(init=False, repr=False)
    pinv: DenseMatrix = field(init=False, repr=False)
    eigenvalues: DenseVector = field(init=False, repr=False)
    rank: int = field(init=False)
    sweeps: int = field(init=False)

    def __post_init__(self):
        A = as_matrix(self.A)
        gram = A @ A.T
        gram = 0.5 * (gram + gram.T)
        lam, V, sweeps = jacobi_eigh(gram)
        lam_max = float(lam.max()) if lam.size else 0.0
        keep = lam > PINV_EIG_RTOL * lam_max if lam_max > 0 else np.zeros_like(lam, dtype=bool)
        inv = np.where(keep, 1.0 / np.where(keep, lam, 1.0), 0.0)
        pinv = (V * inv) @ V.T
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "gram", gram)
        object.__setattr__(self, "pinv", 0.5 * (pinv + pinv.T))
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "rank", int(keep.sum()))
        object.__setattr__(self, "sweeps", sweeps)
        _logger.debug("PinvOracle: %s, rango %d, %d barridos", A.shape, self.rank, sweeps)

    def penrose_residual(self) -> float:
        """‖G G† G − G‖_F / max(1, ‖G‖_F) con G = AAᵀ."""

        G = self.gram
        return float(np.linalg.norm(G @ self.pinv @ G - G) / max(1.0, np.linalg.norm(G)))


def pinv_project(oracle: PinvOracle, eps: ArrayLike) -> DenseVector:
    """ε* = Aᵀ(AAᵀ)†Aε por fuerza bruta; admite lote (S, n)."""

    eps = as_vector(eps, "eps")
    if eps.shape[-1] != oracle.A.shape[1]:
        raise DimensionMismatchError("pinv_project", oracle.A.shape, eps.shape)
    return ((eps @ oracle.A.T) @ oracle.pinv) @ oracle.A


def solve_gaussian_elimination(M: ArrayLike, b: ArrayLike) -> DenseVector:
    """Solve Mx = b con pivoteo parcial; lanza NumericError si M es singular."""

    M = as_matrix(M, "M").copy()
    x = as_vector(b, "b").astype(np.float64).copy()
    m = M.shape[0]
    if M.shape != (m, m) or x.shape != (m,):
        raise DimensionMismatchError("solve_gaussian_elimination", M.shape, x.shape)
    scale = max(float(np.abs(M).max()) if m else 0.0, np.finfo(np.float64).tiny)

    for k in range(m):
        piv = k + int(np.argmax(np.abs(M[k:, k])))
        if abs(M[piv, k]) <= 1e-13 * scale:
            raise NumericError(f"matriz singular en la columna {k}")
        if piv != k:
            M[[k, piv]] = M[[piv, k]]
            x[[k, piv]] = x[[piv, k]]
        factors = M[k + 1 :, k] / M[k, k]
        M[k + 1 :, k:] -= factors[:, None] * M[k, k:]
        x[k + 1 :] -= factors * x[k]

    for k in reversed(range(m)):
        x[k] = (x[k] - M[k, k + 1 :] @ x[k + 1 :]) / M[k, k]
    return x


@dataclass(frozen=True)
class QuadraticOracle:
    """
    ℓ̃(z) = ½zᵀHz + bᵀz sobre z = W·v, v ~ N(μ, diag τ).

    Gradiente exacto del valor esperado:
      ∇_μ E[ℓ]   = WᵀHWμ + Wᵀb
      ∇_τi E[ℓ]  = ½(WᵀHW)_ii
    """

    H: DenseMatrix
    b: DenseVector
    site: LinearMapContext

    def __post_init__(self):
        H = as_matrix(self.H, "H")
        b = as_vector(self.b, "b")
        m = self.site.m
        if H.shape != (m, m) or b.shape != (m,):
            raise DimensionMismatchError("QuadraticOracle", (m, m), H.shape)
        if not np.allclose(H, H.T, rtol=0.0, atol=1e-12):
            raise ConfigError("H debe ser simétrica (tolerancia 1e-12)")
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "b", b)

    def loss(self, z: ArrayLike) -> float | DenseVector:
        z = as_vector(z, "z")
        out = 0.5 * np.einsum("...i,ij,...j->...", z, self.H, z) + z @ self.b
        return float(out) if np.ndim(out) == 0 else out

    def upstream(self, z: ArrayLike) -> DenseVector:
        """∂ℓ̃/∂z = Hz + b."""

        return as_vector(z, "z") @ self.H + self.b

    def true_gradient(self) -> DenseVector:
        W, mu = self.site.W, self.site.theta.mu
        curvature = W.T @ self.H @ W
        d_mu = curvature @ mu + W.T @ self.b
        d_tau = 0.5 * np.diag(curvature)
        return np.concatenate([d_mu, d_tau])
