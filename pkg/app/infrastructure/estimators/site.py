from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.typing import ArrayLike

from app.domain.errors import DegenerateVarianceError, DimensionMismatchError
from app.infrastructure.gaussian.diag import DiagGaussianParams
from app.infrastructure.gaussian.rng import RngStream
from app.infrastructure.linalg.dense import DenseMatrix, DenseVector, as_matrix, as_vector

"""
Tipos de un sitio estocástico lineal: ℓ(g(ε, θ)) = (ℓ̃ ∘ W)(g(ε, θ)).
"""


class EstimatorId(str, Enum):
    SCORE = "SCORE"
    RT = "RT"
    LRT = "LRT"
    R2G2 = "R2G2"


@dataclass(frozen=True)
class LinearMapContext:
    """
    Sitio de Rao-Blackwellización: W (m×n), θ n-dimensional y A = W·Σ^{1/2} cacheada.

    A se calcula al construir; un θ nuevo requiere un contexto nuevo.
    """

    W: DenseMatrix
    theta: DiagGaussianParams
    A: DenseMatrix = field(init=False, repr=False)

    def __post_init__(self):
        W = as_matrix(self.W, "W")
        if W.shape[1] != self.theta.dim:
            raise DimensionMismatchError("LinearMapContext", W.shape, (self.theta.dim,))
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "A", W * self.theta.sigma)

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def n(self) -> int:
        return self.W.shape[1]

    def mean_preactivation(self) -> DenseVector:
        return self.W @ self.theta.mu

    def preactivation(self, eps: ArrayLike) -> DenseVector:
        """z = W(μ + Σ^{1/2}ε) (lote opcional)."""

        eps = as_vector(eps, "eps")
        if eps.shape[-1] != self.n:
            raise DimensionMismatchError("preactivation", (self.n,), eps.shape)
        return self.mean_preactivation() + eps @ self.A.T


@dataclass(frozen=True)
class UpstreamGradient:
    """∂ℓ̃/∂z evaluado en la pre-activación; (m,) o (S, m)."""

    d_ltilde_dz: DenseVector

    def __post_init__(self):
        object.__setattr__(self, "d_ltilde_dz", as_vector(self.d_ltilde_dz, "d_ltilde_dz"))


@dataclass(frozen=True)
class GradientEstimate:
    """Bloques [∂/∂μ | ∂/∂τ] de un estimador; τ son varianzas (no log τ)."""

    d_mu: DenseVector
    d_tau: DenseVector
    estimator_id: EstimatorId
    noise_tag: RngStream | None = None

    def flat(self) -> DenseVector:
        return np.concatenate([self.d_mu, self.d_tau], axis=-1)


@dataclass(frozen=True)
class StochasticLayerTrace:
    """
    Registro del forward de un sitio R2-G2.

    z es la pre-activación centrada Aε; el valor propagado hacia adelante es z
    y el backward usa eps_star.
    """

    eps: DenseVector
    z: DenseVector
    beta_star: DenseVector
    eps_star: DenseVector
    z_star: DenseVector
    cg_iters: int


def checked_sigma(theta: DiagGaussianParams) -> DenseVector:
    sigma = theta.sigma
    if np.any(sigma == 0.0):
        raise DegenerateVarianceError("degenerate variance: σ_i = 0 en el sitio")
    return sigma


def check_upstream(ctx: LinearMapContext, up: UpstreamGradient):
    if up.d_ltilde_dz.shape[-1] != ctx.m:
        raise DimensionMismatchError("upstream gradient", (ctx.m,), up.d_ltilde_dz.shape)
