import numpy as np
import pytest

from app.domain.errors import DegenerateVarianceError, DimensionMismatchError
from app.infrastructure.estimators.local import LrtSite, derive_xi_from_z, lrt_gradient
from app.infrastructure.estimators.reparam import (
    condition_on_preactivation,
    forward_r2g2,
    r2g2_gradient,
    rt_gradient,
)
from app.infrastructure.estimators.score import score_gradient
from app.infrastructure.estimators.site import EstimatorId, LinearMapContext, UpstreamGradient
from app.infrastructure.gaussian.diag import DiagGaussianParams, log_density_diag
from app.infrastructure.harness.sites import paired_site_gradients, quadratic_oracle, random_theta


@pytest.fixture
def dense_site():
    rng = np.random.default_rng(5)
    ctx = LinearMapContext(W=rng.standard_normal((2, 5)), theta=random_theta(rng, 5))
    eps = rng.standard_normal(5)
    up = UpstreamGradient(rng.standard_normal(2))
    return ctx, eps, up


class TestReparameterisation:
    def test_rt_closed_form(self):
        theta = DiagGaussianParams.from_variances([0.0, 0.0], [4.0, 1.0])
        ctx = LinearMapContext(W=np.array([[1.0, 2.0]]), theta=theta)
        g = rt_gradient(ctx, UpstreamGradient([3.0]), [0.5, -1.0])
        np.testing.assert_allclose(g.d_mu, [3.0, 6.0])
        # d_τ = d_μ ⊙ ε / (2σ)
        np.testing.assert_allclose(g.d_tau, [3.0 * 0.5 / 4.0, 6.0 * -1.0 / 2.0])
        assert g.estimator_id is EstimatorId.RT

    def test_forward_preserves_preactivation(self, dense_site):
        ctx, eps, _ = dense_site
        trace = forward_r2g2(ctx, eps)
        np.testing.assert_allclose(trace.z, ctx.A @ eps, rtol=1e-12)
        np.testing.assert_allclose(trace.z_star, trace.z, atol=1e-9)
        np.testing.assert_allclose(trace.eps_star, np.linalg.pinv(ctx.A) @ ctx.A @ eps, atol=1e-9)

    def test_forward_hand_example(self):
        ctx = LinearMapContext(
            W=np.array([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]]),
            theta=DiagGaussianParams(mu=np.zeros(3), log_tau=np.zeros(3)),
        )
        trace = forward_r2g2(ctx, np.ones(3))
        np.testing.assert_allclose(trace.z, [1.0, 2.0])
        np.testing.assert_allclose(trace.beta_star, [0.0, 1.0], atol=1e-12)
        np.testing.assert_allclose(trace.eps_star, [1.0, 1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(trace.z_star, [1.0, 2.0], atol=1e-12)

    def test_kernel_draw_projects_to_zero(self):
        ctx = LinearMapContext(
            W=np.array([[1.0, 0.0, 0.0], [1.0, 1.0, 0.0]]),
            theta=DiagGaussianParams(mu=np.zeros(3), log_tau=np.zeros(3)),
        )
        trace = forward_r2g2(ctx, [0.0, 0.0, 2.5])
        np.testing.assert_array_equal(trace.z, np.zeros(2))
        np.testing.assert_array_equal(trace.eps_star, np.zeros(3))

    def test_mu_blocks_identical(self, dense_site):
        ctx, eps, up = dense_site
        rt = rt_gradient(ctx, up, eps)
        r2 = r2g2_gradient(ctx, up, forward_r2g2(ctx, eps))
        np.testing.assert_array_equal(rt.d_mu, r2.d_mu)

    def test_full_column_rank_site_reduces_to_rt(self):
        rng = np.random.default_rng(6)
        W = rng.standard_normal((3, 3)) + 3.0 * np.eye(3)
        ctx = LinearMapContext(W=W, theta=random_theta(rng, 3))
        eps = rng.standard_normal(3)
        up = UpstreamGradient(rng.standard_normal(3))
        rt = rt_gradient(ctx, up, eps)
        r2 = r2g2_gradient(ctx, up, forward_r2g2(ctx, eps))
        np.testing.assert_allclose(r2.d_tau, rt.d_tau, rtol=1e-6, atol=1e-9)

    def test_conditioning_on_full_preactivation(self, dense_site):
        ctx, eps, _ = dense_site
        from_eps = forward_r2g2(ctx, eps)
        from_z = condition_on_preactivation(ctx, ctx.preactivation(eps))
        np.testing.assert_allclose(from_z.eps_star, from_eps.eps_star, atol=1e-9)

    def test_batched_draws(self, dense_site):
        ctx, _, _ = dense_site
        eps = np.random.default_rng(7).standard_normal((4, 5))
        trace = forward_r2g2(ctx, eps)
        assert trace.eps_star.shape == (4, 5)
        np.testing.assert_allclose(trace.eps_star[2], forward_r2g2(ctx, eps[2]).eps_star, atol=1e-10)

    def test_degenerate_variance(self):
        theta = DiagGaussianParams(mu=np.zeros(2), log_tau=np.array([0.0, -2000.0]))
        ctx = LinearMapContext(W=np.ones((1, 2)), theta=theta)
        with pytest.raises(DegenerateVarianceError):
            rt_gradient(ctx, UpstreamGradient([1.0]), np.ones(2))

    def test_noise_dimension_mismatch(self, dense_site):
        ctx, _, up = dense_site
        with pytest.raises(DimensionMismatchError):
            rt_gradient(ctx, up, np.ones(4))
        with pytest.raises(DimensionMismatchError):
            rt_gradient(ctx, UpstreamGradient(np.ones(3)), np.ones(5))


class TestLocalReparameterisation:
    @pytest.fixture
    def unit_site(self):
        rng = np.random.default_rng(8)
        site = LrtSite(x=rng.standard_normal(6), theta_rows=(random_theta(rng, 6),))
        return site, rng

    def test_equivalent_to_r2g2_on_single_unit(self, unit_site):
        site, rng = unit_site
        ctx = site.unit_context(0)
        z = ctx.preactivation(rng.standard_normal(6))
        up = UpstreamGradient([rng.standard_normal()])
        lrt = lrt_gradient(site.with_xi(derive_xi_from_z(site, z)), up)[0]
        r2 = r2g2_gradient(ctx, up, condition_on_preactivation(ctx, z))
        np.testing.assert_allclose(lrt.d_mu, r2.d_mu, atol=1e-12)
        np.testing.assert_allclose(lrt.d_tau, r2.d_tau, atol=1e-9)

    def test_two_input_hand_example(self):
        site = LrtSite(
            x=np.array([1.0, 1.0]), theta_rows=(DiagGaussianParams(mu=np.zeros(2), log_tau=np.zeros(2)),), xi=np.array([1.0])
        )
        g = lrt_gradient(site, UpstreamGradient([2.0]))[0]
        np.testing.assert_allclose(g.d_mu, [2.0, 2.0])
        np.testing.assert_allclose(g.d_tau, [0.70710678, 0.70710678], rtol=1e-8)

    def test_unit_input_hand_example(self):
        site = LrtSite(
            x=np.array([1.0, 0.0]), theta_rows=(DiagGaussianParams(mu=np.zeros(2), log_tau=np.zeros(2)),), xi=np.array([1.0])
        )
        g = lrt_gradient(site, UpstreamGradient([1.0]))[0]
        np.testing.assert_allclose(g.d_mu, [1.0, 0.0])
        np.testing.assert_allclose(g.d_tau, [0.5, 0.0])

    def test_derive_xi_hand_example(self):
        site = LrtSite(x=np.array([1.0]), theta_rows=(DiagGaussianParams.from_variances([0.0], [4.0]),))
        np.testing.assert_allclose(derive_xi_from_z(site, [2.0]), [1.0])
        np.testing.assert_allclose(derive_xi_from_z(site, [0.0]), [0.0])

    def test_preactivation_roundtrip(self, unit_site):
        site, _ = unit_site
        z = np.array([0.7])
        np.testing.assert_allclose(site.with_xi(derive_xi_from_z(site, z)).preactivation(), z, atol=1e-12)

    def test_zero_input_is_degenerate(self):
        site = LrtSite(x=np.zeros(3), theta_rows=(DiagGaussianParams(np.zeros(3), np.zeros(3)),))
        with pytest.raises(DegenerateVarianceError):
            site.preactivation_std()

    def test_requires_xi(self, unit_site):
        site, _ = unit_site
        with pytest.raises(ValueError):
            lrt_gradient(site, UpstreamGradient([1.0]))

    def test_one_estimate_per_unit(self):
        rng = np.random.default_rng(9)
        site = LrtSite(x=np.ones(2), theta_rows=tuple(random_theta(rng, 2) for _ in range(3)), xi=np.zeros(3))
        parts = lrt_gradient(site, UpstreamGradient([1.0, 2.0, 3.0]))
        assert len(parts) == 3
        np.testing.assert_allclose(parts[2].d_mu, [3.0, 3.0])
        np.testing.assert_array_equal(parts[1].d_tau, np.zeros(2))


class TestScoreFunction:
    def test_matches_log_density_derivatives(self):
        theta = DiagGaussianParams.from_variances([0.2, -0.5], [0.8, 1.7])
        v = np.array([0.9, 0.1])
        loss = 2.5
        g = score_gradient(theta, loss, v)
        h = 1e-6
        for i in range(2):
            e = np.eye(2)[i] * h
            fd_mu = (log_density_diag(DiagGaussianParams.from_variances(theta.mu + e, theta.tau), v)
                     - log_density_diag(DiagGaussianParams.from_variances(theta.mu - e, theta.tau), v)) / (2 * h)
            fd_tau = (log_density_diag(DiagGaussianParams.from_variances(theta.mu, theta.tau + e), v)
                      - log_density_diag(DiagGaussianParams.from_variances(theta.mu, theta.tau - e), v)) / (2 * h)
            assert g.d_mu[i] == pytest.approx(loss * fd_mu, rel=1e-6)
            assert g.d_tau[i] == pytest.approx(loss * fd_tau, rel=1e-6)

    def test_batched_losses(self):
        theta = DiagGaussianParams(mu=np.zeros(3), log_tau=np.zeros(3))
        v = np.random.default_rng(1).standard_normal((4, 3))
        g = score_gradient(theta, np.arange(4.0), v)
        assert g.d_mu.shape == (4, 3)
        np.testing.assert_array_equal(g.d_mu[0], np.zeros(3))


@pytest.mark.slow
class TestEstimatorVariance:
    @pytest.fixture
    def quadratic(self):
        rng = np.random.default_rng(12)
        ctx = LinearMapContext(W=rng.standard_normal((2, 8)), theta=random_theta(rng, 8))
        oracle = quadratic_oracle(rng, ctx)
        eps = rng.standard_normal((20_000, 8))
        grads = paired_site_gradients(oracle, eps, [EstimatorId.SCORE, EstimatorId.RT, EstimatorId.R2G2])
        return oracle, grads

    def test_score_mu_variance_exceeds_rt(self, quadratic):
        _, grads = quadratic
        score = grads[EstimatorId.SCORE][:, :8].var(axis=0, ddof=1)
        rt = grads[EstimatorId.RT][:, :8].var(axis=0, ddof=1)
        assert score.mean() > rt.mean()

    def test_r2g2_mean_squared_error_below_rt(self, quadratic):
        oracle, grads = quadratic
        truth = oracle.true_gradient()
        mse = {
            estimator: float(np.mean(np.sum((grads[estimator] - truth) ** 2, axis=1)))
            for estimator in (EstimatorId.RT, EstimatorId.R2G2)
        }
        assert mse[EstimatorId.R2G2] <= mse[EstimatorId.RT]
