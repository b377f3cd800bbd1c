import numpy as np
import pytest

from dhforecast.errors import NonConvergence
from dhforecast.experts.svr import fit_svr, rbf_kernel, warm_start_duals

from oracles import svr_dual_brute_force


def five_points(C):
    X = np.array([[0.0, 0.2], [1.0, -0.5], [2.0, 0.1], [3.0, 0.7], [4.0, -0.3]])
    y = np.array([0.3, 1.1, 0.2, -0.9, 0.4])
    return X, y


class TestBruteForceDual:
    @pytest.mark.parametrize("C", [0.5, 5.0, 100.0])
    def test_predictions_match(self, C):
        X, y = five_points(C)
        gamma, eps = 0.5, 0.1
        state = fit_svr(X, y, C=C, gamma=gamma, epsilon=eps, tol=1e-10)
        beta, b = svr_dual_brute_force(rbf_kernel(X, X, gamma), y, C, eps)
        Xq = np.random.default_rng(0).uniform(-1, 5, size=(20, 2))
        expected = rbf_kernel(Xq, X, gamma) @ beta + b
        np.testing.assert_allclose(state.predict(Xq), expected, atol=1e-4)
        np.testing.assert_allclose(state.predict(X), rbf_kernel(X, X, gamma) @ beta + b, atol=1e-4)

    @pytest.mark.parametrize("C", [0.5, 5.0])
    def test_box_and_complementary_slackness(self, C):
        X, y = five_points(C)
        eps = 0.1
        state = fit_svr(X, y, C=C, gamma=0.5, epsilon=eps, tol=1e-10)
        beta = state.beta
        assert np.all(np.abs(beta) <= C + 1e-12)
        np.testing.assert_allclose(beta.sum(), 0.0, atol=1e-10)
        f = state.predict(X)
        r = y - f
        full = np.zeros(len(y))
        rows = [np.flatnonzero(np.all(X == s, axis=1))[0] for s in state.support]
        full[rows] = beta
        for i in range(len(y)):
            if full[i] == 0:
                assert abs(r[i]) <= eps + 1e-6
            elif 0 < full[i] < C:
                assert r[i] == pytest.approx(eps, abs=1e-6)
            elif -C < full[i] < 0:
                assert r[i] == pytest.approx(-eps, abs=1e-6)
            elif full[i] == C:
                assert r[i] >= eps - 1e-6
            else:
                assert r[i] <= -eps + 1e-6


class TestSolver:
    def data(self, n=200, seed=0):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, 3))
        y = np.sin(X[:, 0]) + 0.3 * X[:, 1] + 0.05 * rng.normal(size=n)
        return X, y

    def test_tiny_gamma_gives_constant(self):
        X, y = self.data()
        state = fit_svr(X, y, C=1.0, gamma=1e-12, epsilon=0.01)
        pred = state.predict(X)
        assert np.ptp(pred) < 1e-6

    def test_epsilon_tube_holds_with_large_C(self):
        X, y = self.data(80)
        state = fit_svr(X, y, C=1e4, gamma=1.0, epsilon=0.05, tol=1e-8)
        assert np.max(np.abs(state.predict(X) - y)) <= 0.05 + 1e-5

    def test_iteration_cap(self):
        X, y = self.data()
        with pytest.raises(NonConvergence):
            fit_svr(X, y, C=100.0, gamma=0.5, epsilon=0.01, max_iter=3)

    def test_warm_start_reaches_same_optimum(self):
        X, y = self.data(150)
        hours = np.arange(150) * 2
        kw = dict(C=10.0, gamma=0.5, epsilon=0.01, tol=1e-6)
        first = fit_svr(X[:130], y[:130], hours=hours[:130], **kw)
        init = warm_start_duals(first, hours, 10.0)
        assert init is not None
        warm = fit_svr(X, y, hours=hours, init=init, **kw)
        cold = fit_svr(X, y, hours=hours, **kw)
        assert warm.iterations < cold.iterations
        np.testing.assert_allclose(warm.predict(X), cold.predict(X), atol=1e-4)

    def test_warm_start_needs_old_support_rows(self):
        X, y = self.data(100)
        first = fit_svr(X, y, C=10.0, gamma=0.5, epsilon=0.01, hours=np.arange(100))
        assert warm_start_duals(first, np.arange(50, 150), 10.0) is None
        assert warm_start_duals(first, np.arange(100), 0.001) is None
