from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import ArrayLike

from app.domain.errors import DegenerateVarianceError, DimensionMismatchError
from app.infrastructure.estimators.site import (
    EstimatorId,
    GradientEstimate,
    LinearMapContext,
    UpstreamGradient,
)
from app.infrastructure.gaussian.diag import DiagGaussianParams
from app.infrastructure.gaussian.rng import RngStream
from app.infrastructure.linalg.dense import DenseMatrix, DenseVector, as_vector

"""
Truco de reparametrización local para una capa con pesos independientes por unidad.

Cada unidad i tiene pre-activación z_i = xᵀμ⁽ⁱ⁾ + s_i·ξ_i con
s_i² = Σ_j x_j² τ_j⁽ⁱ⁾ y ξ_i ~ N(0, 1).
"""


@dataclass(frozen=True)
class LrtSite:
    x: DenseVector
    theta_rows: tuple[DiagGaussianParams, ...]
    xi: DenseVector | None = None

    def __post_init__(self):
        x = as_vector(self.x, "x")
        if x.ndim != 1:
            raise DimensionMismatchError("LrtSite.x", x.shape, ("n",))
        rows = tuple(self.theta_rows)
        for theta in rows:
            if theta.dim != x.shape[0]:
                raise DimensionMismatchError("LrtSite.theta_rows", x.shape, (theta.dim,))
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "theta_rows", rows)
        if self.xi is not None:
            xi = as_vector(self.xi, "xi")
            if xi.shape[-1] != len(rows):
                raise DimensionMismatchError("LrtSite.xi", (len(rows),), xi.shape)
            object.__setattr__(self, "xi", xi)

    @property
    def m(self) -> int:
        return len(self.theta_rows)

    def with_xi(self, xi: ArrayLike) -> "LrtSite":
        return replace(self, xi=xi)

    def mu_matrix(self) -> DenseMatrix:
        return np.stack([t.mu for t in self.theta_rows])

    def tau_matrix(self) -> DenseMatrix:
        return np.stack([t.tau for t in self.theta_rows])

    def mean_preactivation(self) -> DenseVector:
        return self.mu_matrix() @ self.x

    def preactivation_std(self) -> DenseVector:
        """s_i; lanza DegenerateVarianceError si alguna varianza es cero."""

        s2 = self.tau_matrix() @ (self.x * self.x)
        if np.any(s2 <= 0.0):
            raise DegenerateVarianceError("degenerate pre-activation variance: Σ_j x_j²τ_j = 0")
        return np.sqrt(s2)

    def preactivation(self) -> DenseVector:
        """z_i = xᵀμ⁽ⁱ⁾ + s_i ξ_i."""

        if self.xi is None:
            raise ValueError("LrtSite sin ξ")
        return self.mean_preactivation() + self.preactivation_std() * self.xi

    def unit_context(self, i: int) -> LinearMapContext:
        """Sitio equivalente de la unidad i: W = xᵀ, θ = θ⁽ⁱ⁾."""

        return LinearMapContext(W=self.x[None, :], theta=self.theta_rows[i])

    def layer_context(self) -> LinearMapContext:
        """Sitio de toda la capa: W = I_m ⊗ xᵀ sobre θ apilado por unidad."""

        theta = DiagGaussianParams(
            mu=np.concatenate([t.mu for t in self.theta_rows]),
            log_tau=np.concatenate([t.log_tau for t in self.theta_rows]),
        )
        return LinearMapContext(W=np.kron(np.eye(self.m), self.x[None, :]), theta=theta)


def derive_xi_from_z(site: LrtSite, z: ArrayLike) -> DenseVector:
    """ξ_i = (z_i − xᵀμ⁽ⁱ⁾) / s_i; empareja LRT y R2-G2 en el mismo evento."""

    z = as_vector(z, "z")
    if z.shape[-1] != site.m:
        raise DimensionMismatchError("derive_xi_from_z", (site.m,), z.shape)
    return (z - site.mean_preactivation()) / site.preactivation_std()


def lrt_gradient(
    site: LrtSite, up: UpstreamGradient, noise_tag: RngStream | None = None
) -> list[GradientEstimate]:
    """
    Un GradientEstimate por unidad:

      d_μ⁽ⁱ⁾ = (∂ℓ̃/∂z_i)·x
      d_τ⁽ⁱ⁾ = (∂ℓ̃/∂z_i)·½ s_i⁻¹ ξ_i·(x ⊙ x)
    """

    if site.xi is None:
        raise ValueError("lrt_gradient requiere ξ (muestreado o derivado de z)")
    g = up.d_ltilde_dz
    if g.shape[-1] != site.m:
        raise DimensionMismatchError("lrt_gradient", (site.m,), g.shape)

    s = site.preactivation_std()
    x = site.x
    coeff = 0.5 * site.xi / s
    out = []
    for i in range(site.m):
        gi = g[..., i, None]
        out.append(
            GradientEstimate(
                d_mu=gi * x,
                d_tau=gi * coeff[..., i, None] * (x * x),
                estimator_id=EstimatorId.LRT,
                noise_tag=noise_tag,
            )
        )
    return out
