import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike

from app.domain.errors import DegenerateVarianceError, DimensionMismatchError
from app.infrastructure.linalg.dense import DenseVector, as_vector

"""
Gaussiana diagonal q_θ = N(μ, diag(τ)) con τ guardado como log τ.

Incluye el mapa de reparametrización g(ε, θ) = μ + Σ^{1/2}ε, la log-densidad
y la KL cerrada contra el prior N(0, I).
"""

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class DiagGaussianParams:
    mu: DenseVector
    log_tau: DenseVector

    def __post_init__(self):
        mu = as_vector(self.mu, "mu").copy()
        log_tau = as_vector(self.log_tau, "log_tau").copy()
        if mu.shape != log_tau.shape or mu.ndim != 1:
            raise DimensionMismatchError("DiagGaussianParams", mu.shape, log_tau.shape)
        mu.setflags(write=False)
        log_tau.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "log_tau", log_tau)

    @classmethod
    def from_variances(cls, mu: ArrayLike, tau: ArrayLike) -> "DiagGaussianParams":
        """Entrada cruda con varianzas; exige τ > 0."""

        tau = as_vector(tau, "tau")
        if np.any(tau <= 0.0):
            raise DegenerateVarianceError("degenerate variance: τ debe ser > 0 en todas las coordenadas")
        return cls(mu=mu, log_tau=np.log(tau))

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    @property
    def tau(self) -> DenseVector:
        return np.exp(self.log_tau)

    @property
    def sigma(self) -> DenseVector:
        return np.exp(0.5 * self.log_tau)


def _check_dim(theta: DiagGaussianParams, v: np.ndarray, what: str):
    if v.shape[-1] != theta.dim:
        raise DimensionMismatchError(what, (theta.dim,), v.shape)


def reparameterise(theta: DiagGaussianParams, eps: ArrayLike) -> DenseVector:
    """v_i = μ_i + σ_i·ε_i (admite lote de ε)."""

    eps = as_vector(eps, "eps")
    _check_dim(theta, eps, "reparameterise")
    return theta.mu + theta.sigma * eps


def log_density_diag(theta: DiagGaussianParams, v: ArrayLike) -> float | np.ndarray:
    """Σ_i [−½log(2π) − ½log τ_i − (v_i − μ_i)²/(2τ_i)]."""

    v = as_vector(v, "v")
    _check_dim(theta, v, "log_density_diag")
    quad = (v - theta.mu) ** 2 / theta.tau
    out = -0.5 * np.sum(_LOG_2PI + theta.log_tau + quad, axis=-1)
    return float(out) if np.ndim(out) == 0 else out


def kl_diag_standard(theta: DiagGaussianParams) -> float:
    """KL(q_θ ‖ N(0, I)) = Σ ½(τ + μ² − 1 − log τ)."""

    return float(0.5 * np.sum(theta.tau + theta.mu ** 2 - 1.0 - theta.log_tau))


def kl_diag_standard_grad(theta: DiagGaussianParams) -> tuple[DenseVector, DenseVector]:
    """Gradiente exacto de la KL respecto a (μ, log τ)."""

    return theta.mu.copy(), 0.5 * (theta.tau - 1.0)
