import numpy as np
from numpy.typing import ArrayLike

from app.domain.errors import DegenerateVarianceError, DimensionMismatchError
from app.infrastructure.estimators.site import EstimatorId, GradientEstimate
from app.infrastructure.gaussian.diag import DiagGaussianParams
from app.infrastructure.gaussian.rng import RngStream
from app.infrastructure.linalg.dense import as_vector


def score_gradient(
    theta: DiagGaussianParams,
    loss_value: ArrayLike,
    v: ArrayLike,
    noise_tag: RngStream | None = None,
) -> GradientEstimate:
    """
    Estimador score-function ℓ·∇_θ log q_θ(v), con v ~ q_θ.

    loss_value escalar o (S,) junto a v de forma (S, n).
    """

    v = as_vector(v, "v")
    if v.shape[-1] != theta.dim:
        raise DimensionMismatchError("score_gradient", (theta.dim,), v.shape)
    tau = theta.tau
    if np.any(tau == 0.0):
        raise DegenerateVarianceError("degenerate variance: τ_i = 0 en score_gradient")

    loss = np.asarray(loss_value, dtype=np.float64)[..., None]
    centred = v - theta.mu
    d_mu = loss * centred / tau
    d_tau = loss * (-0.5 / tau + centred ** 2 / (2.0 * tau ** 2))
    return GradientEstimate(d_mu=d_mu, d_tau=d_tau, estimator_id=EstimatorId.SCORE, noise_tag=noise_tag)
