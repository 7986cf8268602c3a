import logging

from numpy.typing import ArrayLike

from app.domain.errors import DimensionMismatchError
from app.infrastructure.estimators.site import (
    EstimatorId,
    GradientEstimate,
    LinearMapContext,
    StochasticLayerTrace,
    UpstreamGradient,
    check_upstream,
    checked_sigma,
)
from app.infrastructure.gaussian.rng import RngStream
from app.infrastructure.linalg.cg import CgConfig, conjugate_gradient
from app.infrastructure.linalg.dense import DenseVector, as_vector

"""
Estimadores por reparametrización sobre un sitio lineal.

RT usa el ε muestreado; R2-G2 usa la misma fórmula con ε* = Aᵀ(AAᵀ)†Aε,
la media condicional de ε dada la pre-activación. El bloque μ es idéntico
en ambos. β* y ε* son constantes para el backward (el solve queda fuera
de la diferenciación).
"""

_logger = logging.getLogger(__name__)


def _reparam_blocks(ctx: LinearMapContext, up: UpstreamGradient, noise: DenseVector):
    check_upstream(ctx, up)
    sigma = checked_sigma(ctx.theta)
    d_mu = up.d_ltilde_dz @ ctx.W
    d_tau = d_mu * noise / (2.0 * sigma)
    return d_mu, d_tau


def rt_gradient(
    ctx: LinearMapContext,
    up: UpstreamGradient,
    eps: ArrayLike,
    noise_tag: RngStream | None = None,
) -> GradientEstimate:
    """d_μ = Wᵀ·∂ℓ̃/∂z ; d_τ_i = (Wᵀ·∂ℓ̃/∂z)_i · ε_i / (2σ_i)."""

    eps = as_vector(eps, "eps")
    if eps.shape[-1] != ctx.n:
        raise DimensionMismatchError("rt_gradient", (ctx.n,), eps.shape)
    d_mu, d_tau = _reparam_blocks(ctx, up, eps)
    return GradientEstimate(d_mu=d_mu, d_tau=d_tau, estimator_id=EstimatorId.RT, noise_tag=noise_tag)


def r2g2_gradient(
    ctx: LinearMapContext,
    up: UpstreamGradient,
    trace: StochasticLayerTrace,
    noise_tag: RngStream | None = None,
) -> GradientEstimate:
    """Fórmula RT con ε sustituido por ε* del trace."""

    if trace.eps_star.shape[-1] != ctx.n:
        raise DimensionMismatchError("r2g2_gradient", (ctx.n,), trace.eps_star.shape)
    d_mu, d_tau = _reparam_blocks(ctx, up, trace.eps_star)
    return GradientEstimate(d_mu=d_mu, d_tau=d_tau, estimator_id=EstimatorId.R2G2, noise_tag=noise_tag)


def forward_r2g2(ctx: LinearMapContext, eps: ArrayLike, cfg: CgConfig | None = None) -> StochasticLayerTrace:
    """
    Forward con gradientes R2-G2:

      z  = Aε
      β* = conjugate_gradient(A, z)
      ε* = Aᵀβ*
      z* = Aε*

    El valor que sigue hacia adelante es z (stop_gradient(z − z*) + z* vale z).
    """

    eps = as_vector(eps, "eps")
    if eps.shape[-1] != ctx.n:
        raise DimensionMismatchError("forward_r2g2", (ctx.n,), eps.shape)
    z = eps @ ctx.A.T
    return _trace(ctx, eps, z, cfg)


def condition_on_preactivation(
    ctx: LinearMapContext, z: ArrayLike, cfg: CgConfig | None = None
) -> StochasticLayerTrace:
    """
    Trace a partir de una pre-activación completa z = W·v (sin conocer ε).

    Se condiciona en z − Wμ; el ε registrado es el representante de norma mínima ε*.
    """

    z = as_vector(z, "z")
    if z.shape[-1] != ctx.m:
        raise DimensionMismatchError("condition_on_preactivation", (ctx.m,), z.shape)
    return _trace(ctx, None, z - ctx.mean_preactivation(), cfg)


def _trace(ctx: LinearMapContext, eps, z: DenseVector, cfg: CgConfig | None) -> StochasticLayerTrace:
    result = conjugate_gradient(ctx.A, z, cfg)
    eps_star = result.beta_star @ ctx.A
    if eps is None:
        eps = eps_star
    z_star = eps_star @ ctx.A.T
    _logger.debug("forward_r2g2: m=%d n=%d iters=%d", ctx.m, ctx.n, result.iters)
    return StochasticLayerTrace(
        eps=eps,
        z=z,
        beta_star=result.beta_star,
        eps_star=eps_star,
        z_star=z_star,
        cg_iters=result.iters,
    )
