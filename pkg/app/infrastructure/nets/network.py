import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from app.domain.constants import PINV_SV_RTOL
from app.domain.errors import DegenerateVarianceError, DimensionMismatchError, MissingTraceError
from app.infrastructure.estimators.site import EstimatorId, StochasticLayerTrace
from app.infrastructure.gaussian.diag import kl_diag_standard, kl_diag_standard_grad
from app.infrastructure.gaussian.rng import RngStream, sample_standard_normal
from app.infrastructure.linalg.cg import CgConfig, batched_conjugate_gradient
from app.infrastructure.linalg.dense import DenseMatrix, DenseVector
from app.infrastructure.nets.layers import (
    Activation,
    GaussianLinearLayer,
    NoiseSharing,
    init_layer,
)

"""
MLP bayesiano diferenciado a mano.

Cada capa es un sitio estocástico; el modo de estimador sólo cambia el backward:

  RT    pesos μ + σ⊙ε por ejemplo (o por minibatch), gradiente con ε
  LRT   pre-activaciones z = xᵀμ + s·ξ, gradiente local
  R2G2  mismo forward que RT; ε* condicionado en z y backward con ε*

Con noise_sharing=per_example los bloques de AAᵀ son 1×1 (uno por ejemplo y
unidad) y se resuelven con CG; con per_batch cada unidad condiciona en sus B
pre-activaciones y ε* se obtiene por pseudo-inversa en el espacio de pesos.
"""

_logger = logging.getLogger(__name__)


class LrtNoise(str, Enum):
    DERIVED = "derived"
    DIRECT = "direct"


@dataclass(frozen=True)
class BayesianMLP:
    layers: tuple[GaussianLinearLayer, ...]
    activation: Activation = Activation.TANH
    lrt_noise: LrtNoise = LrtNoise.DERIVED
    cg: CgConfig = field(default_factory=CgConfig)

    def activation_for(self, idx: int) -> Activation:
        return Activation.IDENTITY if idx == len(self.layers) - 1 else self.activation

    @property
    def parameter_count(self) -> int:
        return sum(layer.parameter_count for layer in self.layers)

    def flat_params(self) -> DenseVector:
        return np.concatenate([layer.flat_params() for layer in self.layers])

    def with_flat_params(self, flat: DenseVector) -> "BayesianMLP":
        if flat.shape != (self.parameter_count,):
            raise DimensionMismatchError("with_flat_params", (self.parameter_count,), flat.shape)
        layers, offset = [], 0
        for layer in self.layers:
            layers.append(layer.with_flat_params(flat[offset : offset + layer.parameter_count]))
            offset += layer.parameter_count
        return replace(self, layers=tuple(layers))

    def with_estimator(self, mode: EstimatorId) -> "BayesianMLP":
        return replace(self, layers=tuple(layer.with_mode(mode) for layer in self.layers))


def build_network(
    widths: list[int],
    rng: RngStream,
    estimator_mode: EstimatorId = EstimatorId.RT,
    activation: Activation = Activation.TANH,
    noise_sharing: NoiseSharing = NoiseSharing.PER_EXAMPLE,
    gaussian_bias: bool = False,
    lrt_noise: LrtNoise = LrtNoise.DERIVED,
    cg: CgConfig | None = None,
) -> BayesianMLP:
    if len(widths) < 2:
        raise ValueError("widths necesita al menos entrada y salida")
    layers = tuple(
        init_layer(
            widths[i], widths[i + 1], rng.child(i),
            estimator_mode=estimator_mode, noise_sharing=noise_sharing, gaussian_bias=gaussian_bias,
        )
        for i in range(len(widths) - 1)
    )
    return BayesianMLP(layers=layers, activation=activation, lrt_noise=lrt_noise, cg=cg or CgConfig())


@dataclass(frozen=True)
class LayerNoise:
    eps: np.ndarray  # (S, out, in_aug), S = B o 1
    xi: np.ndarray  # (B, out), sólo LRT directo


def draw_noise(net: BayesianMLP, batch_size: int, rng: RngStream) -> tuple[LayerNoise, ...]:
    """Ruido de todas las capas; el stream (capa, 0) da ε y (capa, 1) da ξ."""

    out = []
    for idx, layer in enumerate(net.layers):
        draws = batch_size if layer.noise_sharing is NoiseSharing.PER_EXAMPLE else 1
        out.append(
            LayerNoise(
                eps=sample_standard_normal((draws, layer.out_dim, layer.in_aug), rng.child(idx, 0)),
                xi=sample_standard_normal((batch_size, layer.out_dim), rng.child(idx, 1)),
            )
        )
    return tuple(out)


@dataclass(frozen=True)
class LayerRecord:
    inputs: DenseMatrix  # entradas aumentadas (B, in_aug)
    eps: np.ndarray
    pre: DenseMatrix
    post: DenseMatrix
    xi: DenseMatrix | None = None
    pre_std: DenseMatrix | None = None
    trace: StochasticLayerTrace | None = None

    @property
    def cg_iters_mean(self) -> float:
        return float(self.trace.cg_iters) if self.trace is not None else 0.0


@dataclass(frozen=True)
class ForwardTape:
    records: tuple[LayerRecord, ...]

    @property
    def outputs(self) -> DenseMatrix:
        return self.records[-1].post


@dataclass(frozen=True)
class LayerGradient:
    d_mu: DenseMatrix
    d_tau: DenseMatrix
    d_log_tau: DenseMatrix
    d_bias: DenseVector | None

    def flat(self) -> DenseVector:
        parts = [self.d_mu.reshape(-1), self.d_log_tau.reshape(-1)]
        if self.d_bias is not None:
            parts.append(self.d_bias)
        return np.concatenate(parts)

    def __add__(self, other: "LayerGradient") -> "LayerGradient":
        return LayerGradient(
            d_mu=self.d_mu + other.d_mu,
            d_tau=self.d_tau + other.d_tau,
            d_log_tau=self.d_log_tau + other.d_log_tau,
            d_bias=None if self.d_bias is None else self.d_bias + other.d_bias,
        )


@dataclass(frozen=True)
class NetworkGradient:
    """Gradiente por capa; `flat()` sigue el layout de BayesianMLP.flat_params (μ, log τ, bias)."""

    layers: tuple[LayerGradient, ...]

    def flat(self) -> DenseVector:
        return np.concatenate([g.flat() for g in self.layers])

    def __add__(self, other: "NetworkGradient") -> "NetworkGradient":
        return NetworkGradient(tuple(a + b for a, b in zip(self.layers, other.layers)))


def _pre_activation_std(x: DenseMatrix, tau: DenseMatrix) -> DenseMatrix:
    return np.sqrt((x * x) @ tau.T)


def _r2g2_per_example(x, sigma, tau, eps, z_noise, cfg) -> StochasticLayerTrace:
    B, out = z_noise.shape
    s2 = ((x * x) @ tau.T).reshape(-1, 1)
    result = batched_conjugate_gradient(lambda Y: s2 * Y, z_noise.reshape(-1, 1), cfg)
    beta = result.beta_star.reshape(B, out)
    eps_star = sigma[None, :, :] * x[:, None, :] * beta[:, :, None]
    z_star = np.einsum("bij,ij,bj->bi", eps_star, sigma, x)
    return StochasticLayerTrace(
        eps=eps, z=z_noise, beta_star=beta, eps_star=eps_star, z_star=z_star,
        cg_iters=int(result.iters),
    )


def _r2g2_per_batch(x, sigma, tau, eps, z_noise, cfg) -> StochasticLayerTrace:
    """
    Proyección en el espacio de pesos de cada unidad: A_i = X·diag(σ_i), ε*_i = A_i⁺ z_i.

    X (B, in_aug) de activaciones ocultas suele tener rango efectivo bajo y el
    bloque B×B queda casi singular; la pseudo-inversa por SVD recorta los valores
    singulares bajo PINV_SV_RTOL·s_max y nunca forma AAᵀ.
    """

    A = x[None, :, :] * sigma[:, None, :]  # (out, B, in_aug)
    A_pinv = np.linalg.pinv(A, rtol=PINV_SV_RTOL)  # (out, in_aug, B)
    eps_star = np.einsum("onb,bo->on", A_pinv, z_noise)
    beta = np.einsum("onb,on->ob", A_pinv, eps_star)  # (AAᵀ)†z = (A⁺)ᵀA⁺z
    z_star = x @ (sigma * eps_star).T
    return StochasticLayerTrace(
        eps=eps, z=z_noise, beta_star=beta, eps_star=eps_star[None, :, :], z_star=z_star,
        cg_iters=0,
    )


def _noise_preactivation(layer: GaussianLinearLayer, x: DenseMatrix, sigma: DenseMatrix, eps: np.ndarray):
    if layer.noise_sharing is NoiseSharing.PER_EXAMPLE:
        return np.einsum("bij,ij,bj->bi", eps, sigma, x)
    return x @ (sigma * eps[0]).T


def forward(
    net: BayesianMLP,
    inputs: DenseMatrix,
    rng: RngStream | None = None,
    *,
    noise: tuple[LayerNoise, ...] | None = None,
) -> tuple[DenseMatrix, ForwardTape]:
    """
    Forward estocástico; determinista dado `rng` (o `noise` explícito).

    Para RT, LRT derivado y R2G2 las pre-activaciones son idénticas con el mismo ε.
    """

    h = np.asarray(inputs, dtype=np.float64)
    if h.ndim != 2 or h.shape[0] == 0:
        raise DimensionMismatchError("forward", h.shape, ("B", net.layers[0].in_dim))
    if noise is None:
        if rng is None:
            raise ValueError("forward necesita rng o noise")
        noise = draw_noise(net, h.shape[0], rng)

    records = []
    for idx, layer in enumerate(net.layers):
        x = layer.augment(h)
        sigma, tau, mu = layer.sigma_matrix(), layer.tau_matrix(), layer.mu_matrix()
        eps = noise[idx].eps
        mean = x @ mu.T
        xi = pre_std = trace = None

        if layer.estimator_mode is EstimatorId.LRT:
            pre_std = _pre_activation_std(x, tau)
            if np.any(pre_std <= 0.0):
                raise DegenerateVarianceError(f"degenerate pre-activation variance en la capa {idx}")
            if net.lrt_noise is LrtNoise.DERIVED:
                z_noise = _noise_preactivation(layer, x, sigma, eps)
                xi = z_noise / pre_std
            else:
                xi = noise[idx].xi
                z_noise = pre_std * xi
        else:
            z_noise = _noise_preactivation(layer, x, sigma, eps)
            if layer.estimator_mode is EstimatorId.R2G2:
                solve = _r2g2_per_example if layer.noise_sharing is NoiseSharing.PER_EXAMPLE else _r2g2_per_batch
                trace = solve(x, sigma, tau, eps, z_noise, net.cg)
                _logger.debug("forward R2G2 capa %d: %d iteraciones CG", idx, trace.cg_iters)

        z = mean + z_noise
        if layer.bias is not None:
            z = z + layer.bias
        a = net.activation_for(idx).apply(z)
        records.append(LayerRecord(inputs=x, eps=eps, pre=z, post=a, xi=xi, pre_std=pre_std, trace=trace))
        h = a

    return h, ForwardTape(records=tuple(records))


def backward(net: BayesianMLP, tape: ForwardTape, loss_grad: DenseMatrix) -> NetworkGradient:
    """
    Reverse-mode manual. El bloque de cada capa coincide con el estimador de su
    modo; el gradiente hacia capas inferiores usa los mismos pesos efectivos
    (μ + σ⊙ε para RT, μ + σ⊙ε* para R2G2).
    """

    if len(tape.records) != len(net.layers):
        raise DimensionMismatchError("backward", (len(net.layers),), (len(tape.records),))
    g = np.asarray(loss_grad, dtype=np.float64)
    grads = []
    for idx in reversed(range(len(net.layers))):
        layer, rec = net.layers[idx], tape.records[idx]
        if g.shape != rec.post.shape:
            raise DimensionMismatchError("loss_grad", rec.post.shape, g.shape)
        dz = g * net.activation_for(idx).derivative(rec.pre, rec.post)
        x = rec.inputs
        sigma, tau, mu = layer.sigma_matrix(), layer.tau_matrix(), layer.mu_matrix()
        d_mu = dz.T @ x

        if layer.estimator_mode is EstimatorId.LRT:
            coeff = dz * rec.xi / rec.pre_std
            d_tau = 0.5 * coeff.T @ (x * x)
            dx = dz @ mu + (coeff @ tau) * x
        else:
            if layer.estimator_mode is EstimatorId.R2G2:
                if rec.trace is None:
                    raise MissingTraceError(f"la capa {idx} está en modo R2G2 y el tape no tiene trace")
                noise = rec.trace.eps_star
            else:
                noise = rec.eps
            if layer.noise_sharing is NoiseSharing.PER_EXAMPLE:
                d_tau = np.einsum("bi,bj,bij->ij", dz, x, noise) / (2.0 * sigma)
                dx = dz @ mu + np.einsum("bi,ij,bij->bj", dz, sigma, noise)
            else:
                d_tau = d_mu * noise[0] / (2.0 * sigma)
                dx = dz @ (mu + sigma * noise[0])

        d_bias = None if layer.gaussian_bias else dz.sum(axis=0)
        grads.append(LayerGradient(d_mu=d_mu, d_tau=d_tau, d_log_tau=d_tau * tau, d_bias=d_bias))
        g = dx[:, : layer.in_dim]

    return NetworkGradient(tuple(reversed(grads)))


def kl_total(net: BayesianMLP) -> float:
    return sum(kl_diag_standard(layer.theta) for layer in net.layers)


def kl_gradient(net: BayesianMLP) -> NetworkGradient:
    """Gradiente cerrado de Σ KL(q‖N(0, I)); determinista, fuera de los estimadores."""

    grads = []
    for layer in net.layers:
        d_mu, d_log_tau = kl_diag_standard_grad(layer.theta)
        tau = layer.theta.tau
        grads.append(
            LayerGradient(
                d_mu=d_mu.reshape(layer.shape),
                d_tau=(d_log_tau / tau).reshape(layer.shape),
                d_log_tau=d_log_tau.reshape(layer.shape),
                d_bias=None if layer.gaussian_bias else np.zeros(layer.out_dim),
            )
        )
    return NetworkGradient(tuple(grads))


def predict_mean(net: BayesianMLP, inputs: DenseMatrix) -> DenseMatrix:
    """Red determinista con pesos = μ."""

    h = np.asarray(inputs, dtype=np.float64)
    for idx, layer in enumerate(net.layers):
        z = layer.augment(h) @ layer.mu_matrix().T
        if layer.bias is not None:
            z = z + layer.bias
        h = net.activation_for(idx).apply(z)
    return h
