import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from app.domain.constants import INIT_TAU
from app.domain.errors import ConfigError, DimensionMismatchError
from app.infrastructure.estimators.site import EstimatorId
from app.infrastructure.gaussian.diag import DiagGaussianParams
from app.infrastructure.gaussian.rng import RngStream, sample_standard_normal
from app.infrastructure.linalg.dense import DenseMatrix, DenseVector

"""
Capa lineal con pesos gaussianos independientes W_ij ~ N(μ_ij, τ_ij).

Los parámetros se guardan planos en row-major (out, in_aug); in_aug incluye
una columna de unos cuando el bias es gaussiano.
"""

NETWORK_ESTIMATORS = (EstimatorId.RT, EstimatorId.LRT, EstimatorId.R2G2)


class Activation(str, Enum):
    TANH = "tanh"
    RELU = "relu"
    IDENTITY = "identity"

    def apply(self, z: np.ndarray) -> np.ndarray:
        if self is Activation.TANH:
            return np.tanh(z)
        if self is Activation.RELU:
            return np.maximum(z, 0.0)
        return z

    def derivative(self, z: np.ndarray, a: np.ndarray) -> np.ndarray:
        """Derivada evaluada con la pre-activación z y la salida a."""

        if self is Activation.TANH:
            return 1.0 - a * a
        if self is Activation.RELU:
            return (z > 0.0).astype(np.float64)
        return np.ones_like(z)


class NoiseSharing(str, Enum):
    PER_EXAMPLE = "per_example"
    PER_BATCH = "per_batch"


@dataclass(frozen=True)
class GaussianLinearLayer:
    in_dim: int
    out_dim: int
    theta: DiagGaussianParams
    bias: DenseVector | None
    estimator_mode: EstimatorId = EstimatorId.RT
    noise_sharing: NoiseSharing = NoiseSharing.PER_EXAMPLE

    def __post_init__(self):
        if self.estimator_mode not in NETWORK_ESTIMATORS:
            raise ConfigError(f"modo de estimador no soportado en capas: {self.estimator_mode}")
        if self.estimator_mode is EstimatorId.LRT and self.noise_sharing is NoiseSharing.PER_BATCH:
            raise ConfigError(
                "LRT requiere pesos independientes por ejemplo y unidad; no aplica con noise_sharing=per_batch"
            )
        if self.theta.dim != self.out_dim * self.in_aug:
            raise DimensionMismatchError("GaussianLinearLayer.theta", (self.out_dim, self.in_aug), (self.theta.dim,))
        if self.bias is not None and np.shape(self.bias) != (self.out_dim,):
            raise DimensionMismatchError("GaussianLinearLayer.bias", (self.out_dim,), np.shape(self.bias))

    @property
    def gaussian_bias(self) -> bool:
        return self.bias is None

    @property
    def in_aug(self) -> int:
        return self.in_dim + (1 if self.gaussian_bias else 0)

    @property
    def shape(self) -> tuple[int, int]:
        return self.out_dim, self.in_aug

    def mu_matrix(self) -> DenseMatrix:
        return self.theta.mu.reshape(self.shape)

    def tau_matrix(self) -> DenseMatrix:
        return self.theta.tau.reshape(self.shape)

    def sigma_matrix(self) -> DenseMatrix:
        return self.theta.sigma.reshape(self.shape)

    def augment(self, x: DenseMatrix) -> DenseMatrix:
        if x.shape[-1] != self.in_dim:
            raise DimensionMismatchError("entrada de capa", (self.in_dim,), x.shape)
        if not self.gaussian_bias:
            return x
        return np.concatenate([x, np.ones((x.shape[0], 1))], axis=1)

    @property
    def parameter_count(self) -> int:
        return 2 * self.theta.dim + (0 if self.gaussian_bias else self.out_dim)

    def flat_params(self) -> DenseVector:
        parts = [self.theta.mu, self.theta.log_tau]
        if not self.gaussian_bias:
            parts.append(self.bias)
        return np.concatenate(parts)

    def with_flat_params(self, flat: DenseVector) -> "GaussianLinearLayer":
        d = self.theta.dim
        theta = DiagGaussianParams(mu=flat[:d], log_tau=flat[d : 2 * d])
        bias = None if self.gaussian_bias else np.array(flat[2 * d :], dtype=np.float64)
        return replace(self, theta=theta, bias=bias)

    def with_mode(self, mode: EstimatorId) -> "GaussianLinearLayer":
        return replace(self, estimator_mode=mode)


def init_layer(
    in_dim: int,
    out_dim: int,
    rng: RngStream,
    estimator_mode: EstimatorId = EstimatorId.RT,
    noise_sharing: NoiseSharing = NoiseSharing.PER_EXAMPLE,
    gaussian_bias: bool = False,
) -> GaussianLinearLayer:
    """μ ~ N(0, 1/in_dim), log τ = log(INIT_TAU), bias en cero."""

    in_aug = in_dim + (1 if gaussian_bias else 0)
    mu = sample_standard_normal((out_dim, in_aug), rng) / math.sqrt(in_dim)
    if gaussian_bias:
        mu[:, -1] = 0.0
    theta = DiagGaussianParams(mu=mu.reshape(-1), log_tau=np.full(out_dim * in_aug, math.log(INIT_TAU)))
    return GaussianLinearLayer(
        in_dim=in_dim,
        out_dim=out_dim,
        theta=theta,
        bias=None if gaussian_bias else np.zeros(out_dim),
        estimator_mode=estimator_mode,
        noise_sharing=noise_sharing,
    )
