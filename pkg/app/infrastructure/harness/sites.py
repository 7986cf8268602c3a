from dataclasses import replace

import numpy as np

from app.infrastructure.estimators.local import LrtSite, derive_xi_from_z, lrt_gradient
from app.infrastructure.estimators.reparam import forward_r2g2, r2g2_gradient, rt_gradient
from app.infrastructure.estimators.score import score_gradient
from app.infrastructure.estimators.site import EstimatorId, GradientEstimate, LinearMapContext, UpstreamGradient
from app.infrastructure.gaussian.diag import DiagGaussianParams, reparameterise
from app.infrastructure.gaussian.rng import RngStream
from app.infrastructure.harness.oracles import QuadraticOracle
from app.infrastructure.linalg.cg import CgConfig
from app.infrastructure.linalg.dense import DenseMatrix

"""
Construcción de sitios aleatorios y muestreo pareado de los cuatro estimadores.

Todos los estimadores de `paired_site_gradients` ven el mismo ε; la fila s de
cada matriz devuelta es el gradiente [d_μ | d_τ] del draw s.
"""


def random_theta(gen: np.random.Generator, n: int, mu_scale: float = 0.5, tau_range=(0.25, 1.0)) -> DiagGaussianParams:
    return DiagGaussianParams.from_variances(
        mu=mu_scale * gen.standard_normal(n), tau=gen.uniform(*tau_range, n)
    )


def random_matrix_with_rank(gen: np.random.Generator, m: int, n: int, rank: int) -> DenseMatrix:
    """U·diag(s)·Vᵀ con s ∈ [0.5, 2] y rank columnas ortonormales."""

    U, _ = np.linalg.qr(gen.standard_normal((m, rank)))
    V, _ = np.linalg.qr(gen.standard_normal((n, rank)))
    return (U * gen.uniform(0.5, 2.0, rank)) @ V.T


def random_spd(gen: np.random.Generator, m: int) -> DenseMatrix:
    G = gen.standard_normal((m, m))
    H = G @ G.T / m + np.eye(m)
    return 0.5 * (H + H.T)


def quadratic_oracle(gen: np.random.Generator, site: LinearMapContext, b_scale: float = 0.5) -> QuadraticOracle:
    return QuadraticOracle(H=random_spd(gen, site.m), b=b_scale * gen.standard_normal(site.m), site=site)


def layer_site(gen: np.random.Generator, units: int, in_dim: int) -> tuple[LinearMapContext, LrtSite]:
    """
    Sitio con estructura de capa: W = I_units ⊗ xᵀ sobre θ apilado por unidad.

    x es fijo (0.5 … 1.5) para que ninguna pre-activación sea degenerada.
    """

    x = np.linspace(0.5, 1.5, in_dim)
    theta = random_theta(gen, units * in_dim)
    rows = tuple(
        DiagGaussianParams(mu=theta.mu[i * in_dim : (i + 1) * in_dim], log_tau=theta.log_tau[i * in_dim : (i + 1) * in_dim])
        for i in range(units)
    )
    lrt = LrtSite(x=x, theta_rows=rows)
    return lrt.layer_context(), lrt


def lrt_flat(parts) -> np.ndarray:
    """Une los GradientEstimate por unidad en el layout [d_μ | d_τ] del sitio de capa."""

    d_mu = np.concatenate([p.d_mu for p in parts], axis=-1)
    d_tau = np.concatenate([p.d_tau for p in parts], axis=-1)
    return np.concatenate([d_mu, d_tau], axis=-1)


def paired_site_estimates(
    oracle: QuadraticOracle,
    eps: np.ndarray,
    estimators: list[EstimatorId],
    cg: CgConfig | None = None,
    lrt_site: LrtSite | None = None,
    r2g2_noise_scale: float = 1.0,
    noise_tag: RngStream | None = None,
) -> dict[EstimatorId, list[GradientEstimate]]:
    """
    GradientEstimate de cada estimador sobre los mismos draws ε (S, n), todos
    con el mismo `noise_tag` (el stream del que salió ε).

    LRT devuelve uno por unidad y requiere `lrt_site` (ξ derivado de z); el
    resto devuelve una lista de un elemento. r2g2_noise_scale ≠ 1 inyecta un
    sesgo en ε* (sólo para medir la potencia de los tests).
    """

    ctx = oracle.site
    z = ctx.preactivation(eps)
    up = UpstreamGradient(oracle.upstream(z))
    out = {}
    for estimator in estimators:
        if estimator is EstimatorId.RT:
            out[estimator] = [rt_gradient(ctx, up, eps, noise_tag=noise_tag)]
        elif estimator is EstimatorId.R2G2:
            trace = forward_r2g2(ctx, eps, cg)
            if r2g2_noise_scale != 1.0:
                trace = replace(trace, eps_star=r2g2_noise_scale * trace.eps_star)
            out[estimator] = [r2g2_gradient(ctx, up, trace, noise_tag=noise_tag)]
        elif estimator is EstimatorId.LRT:
            if lrt_site is None:
                raise ValueError("LRT necesita un sitio con estructura de capa")
            xi = derive_xi_from_z(lrt_site, z)
            out[estimator] = lrt_gradient(lrt_site.with_xi(xi), up, noise_tag=noise_tag)
        else:
            v = reparameterise(ctx.theta, eps)
            out[estimator] = [score_gradient(ctx.theta, oracle.loss(z), v, noise_tag=noise_tag)]
    return out


def paired_site_gradients(
    oracle: QuadraticOracle,
    eps: np.ndarray,
    estimators: list[EstimatorId],
    cg: CgConfig | None = None,
    lrt_site: LrtSite | None = None,
    r2g2_noise_scale: float = 1.0,
    noise_tag: RngStream | None = None,
) -> dict[EstimatorId, np.ndarray]:
    """Gradientes (S, 2n) de `paired_site_estimates` en el layout [d_μ | d_τ] del sitio."""

    estimates = paired_site_estimates(oracle, eps, estimators, cg, lrt_site, r2g2_noise_scale, noise_tag)
    return {
        estimator: lrt_flat(parts) if estimator is EstimatorId.LRT else parts[0].flat()
        for estimator, parts in estimates.items()
    }
