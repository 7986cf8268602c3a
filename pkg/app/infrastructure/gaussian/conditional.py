from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike

from app.domain.errors import DimensionMismatchError
from app.infrastructure.gaussian.rng import RngStream, sample_standard_normal
from app.infrastructure.linalg.cg import CgConfig, conjugate_gradient
from app.infrastructure.linalg.dense import DenseMatrix, DenseVector, as_matrix, as_vector, matvec, rmatvec

"""
Gaussiana condicional ε | Aε = z con ε ~ N(0, I):

    media      Aᵀ(AAᵀ)†z        (ε*, vía CG sobre la ecuación normal)
    covarianza I − Aᵀ(AAᵀ)†A    (sólo su acción; nunca se materializa en producción)
"""


def conditional_mean(A: ArrayLike, z: ArrayLike, cfg: CgConfig | None = None) -> DenseVector:
    """ε* = Aᵀβ* con β* = conjugate_gradient(A, z); admite lote de z."""

    A = as_matrix(A)
    z = as_vector(z, "z")
    if A.shape[0] != z.shape[-1]:
        raise DimensionMismatchError("conditional_mean", A.shape, z.shape)
    result = conjugate_gradient(A, z, cfg)
    return rmatvec(A, result.beta_star)


def conditional_covariance_matvec(A: ArrayLike, y: ArrayLike, cfg: CgConfig | None = None) -> DenseVector:
    """(I − P)y con P = Aᵀ(AAᵀ)†A, calculado como y − conditional_mean(A, Ay)."""

    A = as_matrix(A)
    y = as_vector(y, "y")
    if A.shape[1] != y.shape[-1]:
        raise DimensionMismatchError("conditional_covariance_matvec", A.shape, y.shape)
    return y - conditional_mean(A, matvec(A, y), cfg)


@dataclass(frozen=True)
class ConditionalGaussian:
    """ε | Aε = z. La covarianza se expone como operador diferido."""

    A: DenseMatrix
    z: DenseVector
    cfg: CgConfig = field(default_factory=CgConfig)
    mean: DenseVector = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "mean", conditional_mean(self.A, self.z, self.cfg))

    def cov_matvec(self, y: ArrayLike) -> DenseVector:
        return conditional_covariance_matvec(self.A, y, self.cfg)

    def covariance(self) -> DenseMatrix:
        """Materializa I − P columna a columna (sólo para verificaciones)."""

        n = self.A.shape[1]
        return self.cov_matvec(np.eye(n)).T

    def sample(self, rng: RngStream, count: int) -> DenseMatrix:
        """count draws ε* + (I − P)ζ; como I − P es un proyector, la covarianza es I − P."""

        zeta = sample_standard_normal((count, self.A.shape[1]), rng)
        return self.mean + self.cov_matvec(zeta)
