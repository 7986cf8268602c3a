import numpy as np
import pytest

from app.domain.errors import ConfigError, DegenerateVarianceError, MissingTraceError
from app.infrastructure.estimators.site import EstimatorId
from app.infrastructure.gaussian.rng import RngStream, StreamKey
from app.infrastructure.harness.datasets import DatasetKind, make_synthetic_dataset
from app.infrastructure.nets.layers import Activation, NoiseSharing
from app.infrastructure.nets.losses import Batch, LossKind, LossSpec, elbo_loss, nll_and_grad
from app.infrastructure.nets.network import (
    LayerNoise,
    LrtNoise,
    backward,
    build_network,
    draw_noise,
    forward,
    kl_gradient,
    kl_total,
    predict_mean,
)


def _net(mode=EstimatorId.RT, sharing=NoiseSharing.PER_EXAMPLE, **kw):
    net = build_network([2, 3, 2], RngStream(0), estimator_mode=mode, noise_sharing=sharing, **kw)
    # varianzas grandes para que el ruido pese en el gradiente
    flat = net.flat_params()
    offset = 0
    for layer in net.layers:
        d = layer.theta.dim
        flat[offset + d : offset + 2 * d] = np.log(np.linspace(0.05, 0.5, d))
        offset += layer.parameter_count
    return net.with_flat_params(flat)


def _inputs(B=4):
    return np.random.default_rng(1).standard_normal((B, 2))


def _labels(B=4):
    return np.arange(B) % 2


def _fd_gradient(net, inputs, labels, noise, h=1e-6):
    spec = LossSpec(kind=LossKind.SOFTMAX_NLL)

    def loss(params):
        out, _ = forward(net.with_flat_params(params), inputs, noise=noise)
        return float(np.sum(nll_and_grad(out, labels, spec)[0]))

    p0 = net.flat_params()
    fd = np.zeros_like(p0)
    for i in range(p0.size):
        e = np.zeros_like(p0)
        e[i] = h
        fd[i] = (loss(p0 + e) - loss(p0 - e)) / (2 * h)
    return fd


def _analytic_gradient(net, inputs, labels, noise):
    spec = LossSpec(kind=LossKind.SOFTMAX_NLL)
    out, tape = forward(net, inputs, noise=noise)
    _, grad = nll_and_grad(out, labels, spec)
    return backward(net, tape, grad).flat()


class TestBuildNetwork:
    def test_parameter_count(self):
        net = build_network([2, 3, 2], RngStream(0))
        # (2·6 + 3) + (2·6 + 2)
        assert net.parameter_count == 29
        assert net.flat_params().shape == (29,)

    def test_gaussian_bias_augments_inputs(self):
        net = build_network([2, 3, 2], RngStream(0), gaussian_bias=True)
        assert net.layers[0].shape == (3, 3)
        assert net.parameter_count == 2 * 9 + 2 * 8

    def test_flat_params_roundtrip(self):
        net = _net()
        np.testing.assert_array_equal(net.with_flat_params(net.flat_params()).flat_params(), net.flat_params())

    def test_initialisation_independent_of_estimator(self):
        a = build_network([2, 4, 2], RngStream(3), estimator_mode=EstimatorId.RT)
        b = build_network([2, 4, 2], RngStream(3), estimator_mode=EstimatorId.R2G2)
        np.testing.assert_array_equal(a.flat_params(), b.flat_params())

    def test_lrt_rejected_for_shared_noise(self):
        with pytest.raises(ConfigError):
            build_network([2, 3, 2], RngStream(0), estimator_mode=EstimatorId.LRT, noise_sharing=NoiseSharing.PER_BATCH)

    def test_last_layer_is_linear(self):
        net = build_network([2, 3, 3, 2], RngStream(0), activation=Activation.RELU)
        assert net.activation_for(0) is Activation.RELU
        assert net.activation_for(2) is Activation.IDENTITY


class TestForward:
    def test_modes_share_forward_values(self):
        net = _net()
        x = _inputs()
        noise = draw_noise(net, 4, RngStream(2))
        outputs = {
            mode: forward(net.with_estimator(mode), x, noise=noise)[0]
            for mode in (EstimatorId.RT, EstimatorId.LRT, EstimatorId.R2G2)
        }
        np.testing.assert_allclose(outputs[EstimatorId.LRT], outputs[EstimatorId.RT], rtol=0, atol=1e-12)
        np.testing.assert_allclose(outputs[EstimatorId.R2G2], outputs[EstimatorId.RT], rtol=0, atol=1e-12)

    def test_rng_forward_is_deterministic(self):
        net = _net()
        a, _ = forward(net, _inputs(), RngStream(4))
        b, _ = forward(net, _inputs(), RngStream(4))
        np.testing.assert_array_equal(a, b)

    def test_zero_noise_equals_posterior_mean(self):
        net = _net()
        noise = tuple(
            LayerNoise(eps=np.zeros((4, layer.out_dim, layer.in_aug)), xi=np.zeros((4, layer.out_dim)))
            for layer in net.layers
        )
        out, _ = forward(net, _inputs(), noise=noise)
        np.testing.assert_allclose(out, predict_mean(net, _inputs()), atol=1e-14)

    @pytest.mark.parametrize("sharing", [NoiseSharing.PER_EXAMPLE, NoiseSharing.PER_BATCH])
    def test_r2g2_trace_reproduces_noise_preactivation(self, sharing):
        net = _net(EstimatorId.R2G2, sharing)
        _, tape = forward(net, _inputs(6), RngStream(5))
        for rec in tape.records:
            np.testing.assert_allclose(rec.trace.z_star, rec.trace.z, atol=1e-9)
            if sharing is NoiseSharing.PER_EXAMPLE:
                assert rec.cg_iters_mean >= 1
            else:
                assert rec.cg_iters_mean == 0.0

    def test_lrt_zero_input_is_degenerate(self):
        net = _net(EstimatorId.LRT)
        with pytest.raises(DegenerateVarianceError):
            forward(net, np.zeros((2, 2)), RngStream(0))


class TestSharedNoiseR2G2:
    """Capas per_batch con activaciones ocultas de rango efectivo bajo (2-16-2, B = 32)."""

    def _net(self):
        return build_network(
            [2, 16, 2], RngStream(0).child(StreamKey.INIT),
            estimator_mode=EstimatorId.R2G2, noise_sharing=NoiseSharing.PER_BATCH,
        )

    def test_default_shape_runs_every_step(self):
        net = self._net()
        data = make_synthetic_dataset(DatasetKind.BLOBS, 200, seed=0)
        spec = LossSpec(kind=LossKind.SOFTMAX_NLL)
        for step in range(20):
            batch = data.batch(np.arange(32) + 5 * step)
            out, tape = forward(net, batch.inputs, RngStream(0).child(StreamKey.TRAIN, step))
            _, grad = nll_and_grad(out, batch.targets, spec)
            assert np.all(np.isfinite(backward(net, tape, grad).flat()))
            for rec in tape.records:
                np.testing.assert_allclose(rec.trace.z_star, rec.trace.z, atol=1e-9)

    def test_eps_star_is_orthogonal_projection(self):
        net = self._net()
        inputs = make_synthetic_dataset(DatasetKind.BLOBS, 64, seed=1).inputs[:32]
        _, tape = forward(net, inputs, RngStream(3))
        for rec in tape.records:
            eps, eps_star = rec.eps[0], rec.trace.eps_star[0]
            residual = eps - eps_star
            assert np.all(np.linalg.norm(eps_star, axis=1) <= np.linalg.norm(eps, axis=1) + 1e-9)
            np.testing.assert_allclose(np.sum(eps_star * residual, axis=1), 0.0, atol=1e-6)

    def test_full_column_rank_input_keeps_noise(self):
        # capa de entrada: X (32×2) de rango completo ⇒ ε* = ε
        net = self._net()
        inputs = make_synthetic_dataset(DatasetKind.BLOBS, 64, seed=2).inputs[:32]
        _, tape = forward(net, inputs, RngStream(4))
        rec = tape.records[0]
        np.testing.assert_allclose(rec.trace.eps_star, rec.eps, atol=1e-9)


class TestBackward:
    @pytest.mark.parametrize("sharing", [NoiseSharing.PER_EXAMPLE, NoiseSharing.PER_BATCH])
    def test_rt_matches_finite_differences(self, sharing):
        net = _net(EstimatorId.RT, sharing)
        noise = draw_noise(net, 4, RngStream(6))
        g = _analytic_gradient(net, _inputs(), _labels(), noise)
        fd = _fd_gradient(net, _inputs(), _labels(), noise)
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-7)

    def test_direct_lrt_matches_finite_differences(self):
        net = _net(EstimatorId.LRT, lrt_noise=LrtNoise.DIRECT)
        noise = draw_noise(net, 4, RngStream(7))
        g = _analytic_gradient(net, _inputs(), _labels(), noise)
        fd = _fd_gradient(net, _inputs(), _labels(), noise)
        np.testing.assert_allclose(g, fd, rtol=1e-5, atol=1e-7)

    def test_r2g2_shares_output_layer_mu_block_with_rt(self):
        net = _net()
        noise = draw_noise(net, 4, RngStream(8))
        rt = _analytic_gradient(net, _inputs(), _labels(), noise)
        r2 = _analytic_gradient(net.with_estimator(EstimatorId.R2G2), _inputs(), _labels(), noise)
        # último bloque μ: (2, 3) desde el offset de la capa 1
        start = net.layers[0].parameter_count
        np.testing.assert_allclose(r2[start : start + 6], rt[start : start + 6], atol=1e-12)

    def test_r2g2_without_trace(self):
        net = _net()
        out, tape = forward(net, _inputs(), RngStream(0))
        with pytest.raises(MissingTraceError):
            backward(net.with_estimator(EstimatorId.R2G2), tape, np.ones_like(out))


class TestKl:
    def test_gradient_matches_finite_differences(self):
        net = _net()
        g = kl_gradient(net).flat()
        p0 = net.flat_params()
        h = 1e-6
        for i in range(p0.size):
            e = np.zeros_like(p0)
            e[i] = h
            fd = (kl_total(net.with_flat_params(p0 + e)) - kl_total(net.with_flat_params(p0 - e))) / (2 * h)
            assert g[i] == pytest.approx(fd, rel=1e-6, abs=1e-8)


class TestElbo:
    def test_minibatch_scaling(self):
        net = _net()
        batch = Batch(inputs=_inputs(), targets=_labels())
        _, tape = forward(net, batch.inputs, RngStream(9))
        spec = LossSpec.for_minibatch(LossKind.SOFTMAX_NLL, n_data=40, batch_size=4)
        loss, grad = elbo_loss(net, batch, tape, spec)
        nll, raw = nll_and_grad(tape.outputs, batch.targets, spec)
        assert loss == pytest.approx(10.0 * nll.sum() + kl_total(net))
        np.testing.assert_allclose(grad, 10.0 * raw)
