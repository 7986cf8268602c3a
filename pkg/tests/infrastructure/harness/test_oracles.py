import numpy as np
import pytest

from app.domain.errors import ConfigError, NumericError
from app.infrastructure.estimators.site import LinearMapContext
from app.infrastructure.gaussian.conditional import conditional_mean
from app.infrastructure.harness.oracles import (
    PinvOracle,
    QuadraticOracle,
    jacobi_eigh,
    pinv_project,
    solve_gaussian_elimination,
)
from app.infrastructure.harness.sites import random_matrix_with_rank, random_spd, random_theta


class TestJacobi:
    def test_eigenvalues_match_lapack(self):
        S = random_spd(np.random.default_rng(0), 6)
        lam, V, sweeps = jacobi_eigh(S)
        np.testing.assert_allclose(np.sort(lam), np.linalg.eigvalsh(S), rtol=1e-10)
        np.testing.assert_allclose(V @ np.diag(lam) @ V.T, S, atol=1e-10)
        assert sweeps <= 100

    def test_diagonal_matrix_needs_no_sweeps(self):
        lam, V, sweeps = jacobi_eigh(np.diag([3.0, 1.0]))
        np.testing.assert_array_equal(lam, [3.0, 1.0])
        assert sweeps == 0


class TestPinvOracle:
    @pytest.mark.parametrize("shape,rank", [((3, 7), 3), ((5, 8), 2), ((4, 2), 2), ((6, 12), 1)])
    def test_agrees_with_cg_projection(self, shape, rank):
        rng = np.random.default_rng(sum(shape) + rank)
        A = random_matrix_with_rank(rng, *shape, rank)
        eps = rng.standard_normal(shape[1])
        oracle = PinvOracle(A)
        assert oracle.rank == rank
        np.testing.assert_allclose(pinv_project(oracle, eps), conditional_mean(A, A @ eps), atol=1e-8)
        assert oracle.penrose_residual() <= 1e-10

    def test_matches_numpy_pinv(self):
        A = random_matrix_with_rank(np.random.default_rng(9), 4, 6, 2)
        oracle = PinvOracle(A)
        np.testing.assert_allclose(oracle.pinv, np.linalg.pinv(A @ A.T, rtol=1e-10), atol=1e-8)


class TestGaussianElimination:
    def test_matches_numpy_solve(self):
        rng = np.random.default_rng(1)
        M = rng.standard_normal((5, 5)) + 5 * np.eye(5)
        b = rng.standard_normal(5)
        np.testing.assert_allclose(solve_gaussian_elimination(M, b), np.linalg.solve(M, b), rtol=1e-10)

    def test_needs_pivoting(self):
        M = np.array([[0.0, 1.0], [1.0, 0.0]])
        np.testing.assert_allclose(solve_gaussian_elimination(M, np.array([2.0, 3.0])), [3.0, 2.0])

    def test_singular(self):
        with pytest.raises(NumericError):
            solve_gaussian_elimination(np.array([[1.0, 2.0], [2.0, 4.0]]), np.ones(2))


class TestQuadraticOracle:
    def _expected_loss(self, oracle, mu, tau):
        W = oracle.site.W
        m = W @ mu
        return 0.5 * m @ oracle.H @ m + 0.5 * np.trace(W.T @ oracle.H @ W @ np.diag(tau)) + oracle.b @ m

    def test_true_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        ctx = LinearMapContext(W=rng.standard_normal((2, 4)), theta=random_theta(rng, 4))
        oracle = QuadraticOracle(H=random_spd(rng, 2), b=rng.standard_normal(2), site=ctx)
        mu, tau = ctx.theta.mu, ctx.theta.tau
        truth = oracle.true_gradient()
        h = 1e-6
        for i in range(4):
            e = np.eye(4)[i] * h
            fd_mu = (self._expected_loss(oracle, mu + e, tau) - self._expected_loss(oracle, mu - e, tau)) / (2 * h)
            fd_tau = (self._expected_loss(oracle, mu, tau + e) - self._expected_loss(oracle, mu, tau - e)) / (2 * h)
            assert truth[i] == pytest.approx(fd_mu, rel=1e-6, abs=1e-9)
            assert truth[4 + i] == pytest.approx(fd_tau, rel=1e-6, abs=1e-9)

    def test_upstream_is_loss_gradient(self):
        rng = np.random.default_rng(3)
        ctx = LinearMapContext(W=np.eye(3), theta=random_theta(rng, 3))
        oracle = QuadraticOracle(H=random_spd(rng, 3), b=rng.standard_normal(3), site=ctx)
        z = rng.standard_normal(3)
        np.testing.assert_allclose(oracle.upstream(z), oracle.H @ z + oracle.b)

    def test_rejects_asymmetric_curvature(self):
        rng = np.random.default_rng(4)
        ctx = LinearMapContext(W=np.eye(2), theta=random_theta(rng, 2))
        with pytest.raises(ConfigError):
            QuadraticOracle(H=np.array([[1.0, 0.5], [0.0, 1.0]]), b=np.zeros(2), site=ctx)
