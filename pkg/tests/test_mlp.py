import numpy as np
import pytest

from dhforecast.errors import NonFinite
from dhforecast.experts.mlp import NetState, batch_loss_grad, fit_mlp, init_params, mse


def random_net(d=5, hidden=(6, 4), seed=0):
    rng = np.random.default_rng(seed)
    params = init_params(d, hidden, rng)
    # non-zero output layer and biases so every gradient block is exercised
    params[1] = rng.normal(0, 0.3, hidden[0])
    params[3] = rng.normal(0, 0.3, hidden[1])
    params[4] = rng.normal(0, 1.0, hidden[1])
    params[5] = rng.normal(0, 1.0, 1)
    return params


def loss_and_grads(X, y, params):
    grads = [np.zeros_like(p) for p in params]
    loss = batch_loss_grad(X, y, *params, *grads)
    return loss, grads


def pre_activations(X, params):
    W1, b1, W2, b2, _, _ = params
    z1 = X @ W1 + b1
    z2 = np.maximum(z1, 0) @ W2 + b2
    return np.concatenate([z1.ravel(), z2.ravel()])


class TestGradient:
    H = 1e-6

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_central_differences(self, seed):
        rng = np.random.default_rng(100 + seed)
        X = rng.normal(size=(7, 5))
        y = rng.normal(size=7)
        params = random_net(seed=seed)
        # stay away from ReLU kinks: no pre-activation may cross zero within a step
        assert np.min(np.abs(pre_activations(X, params))) > 1e-3

        loss, grads = loss_and_grads(X, y, params)
        for p, g in zip(params, grads):
            numeric = np.zeros_like(p)
            for idx in np.ndindex(p.shape):
                old = p[idx]
                p[idx] = old + self.H
                up = loss_and_grads(X, y, params)[0]
                p[idx] = old - self.H
                down = loss_and_grads(X, y, params)[0]
                p[idx] = old
                numeric[idx] = (up - down) / (2 * self.H)
            mask = np.abs(numeric) > 1e-7
            rel = np.abs(g - numeric)[mask] / np.maximum(np.abs(g), np.abs(numeric))[mask]
            assert rel.max(initial=0.0) < 1e-4
            np.testing.assert_allclose(g[~mask], 0.0, atol=1e-6)

    def test_loss_is_mean_squared_error(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(9, 5))
        y = rng.normal(size=9)
        params = random_net()
        loss, _ = loss_and_grads(X, y, params)
        assert loss == pytest.approx(mse(NetState(*params), X, y), rel=1e-12)


class TestTraining:
    def test_initial_prediction_is_zero(self):
        params = init_params(4, (12, 12), np.random.default_rng(0))
        np.testing.assert_array_equal(NetState(*params).predict(np.ones((3, 4))), 0.0)

    def test_loss_decreases(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(400, 3))
        y = np.sin(X[:, 0]) + 0.5 * X[:, 1] ** 2
        y = (y - y.mean()) / y.std()
        history = []
        net = fit_mlp(X, y, epochs=60, batch=10, seed=1, history=history)
        assert history[-1] < 0.5 * history[0]
        assert mse(net, X, y) < 0.2

    def test_deterministic(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(50, 3))
        y = X[:, 0]
        a = fit_mlp(X, y, epochs=5, seed=2)
        b = fit_mlp(X, y, epochs=5, seed=2)
        for p, q in zip(a.params, b.params):
            np.testing.assert_array_equal(p, q)

    def test_divergence_reported(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(50, 3)) * 1e3
        with pytest.raises(NonFinite):
            fit_mlp(X, X[:, 0] * 1e3, epochs=20, lr=10.0)
