"""Two-hidden-layer ReLU network trained by mini-batch SGD on squared error."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import NonFinite


@njit(cache=True)
def batch_loss_grad(X, y, W1, b1, W2, b2, W3, b3, gW1, gb1, gW2, gb2, gW3, gb3):
    """Mean squared error of the batch; gradients are written into the g* arrays.

    Shapes: W1 (d, h1), W2 (h1, h2), W3 (h2,), b3 (1,).
    """
    B, d = X.shape
    h1 = W1.shape[1]
    h2 = W2.shape[1]
    gW1[:] = 0.0
    gb1[:] = 0.0
    gW2[:] = 0.0
    gb2[:] = 0.0
    gW3[:] = 0.0
    gb3[:] = 0.0
    z1 = np.empty(h1)
    a1 = np.empty(h1)
    z2 = np.empty(h2)
    a2 = np.empty(h2)
    dz2 = np.empty(h2)
    dz1 = np.empty(h1)
    loss = 0.0
    for s in range(B):
        for j in range(h1):
            acc = b1[j]
            for k in range(d):
                acc += X[s, k] * W1[k, j]
            z1[j] = acc
            a1[j] = acc if acc > 0.0 else 0.0
        for j in range(h2):
            acc = b2[j]
            for k in range(h1):
                acc += a1[k] * W2[k, j]
            z2[j] = acc
            a2[j] = acc if acc > 0.0 else 0.0
        out = b3[0]
        for k in range(h2):
            out += a2[k] * W3[k]
        err = out - y[s]
        loss += err * err
        dout = 2.0 * err / B
        gb3[0] += dout
        for k in range(h2):
            gW3[k] += dout * a2[k]
            dz2[k] = dout * W3[k] if z2[k] > 0.0 else 0.0
        for j in range(h2):
            gb2[j] += dz2[j]
        for k in range(h1):
            acc = 0.0
            for j in range(h2):
                gW2[k, j] += a1[k] * dz2[j]
                acc += W2[k, j] * dz2[j]
            dz1[k] = acc if z1[k] > 0.0 else 0.0
        for j in range(h1):
            gb1[j] += dz1[j]
            for k in range(d):
                gW1[k, j] += X[s, k] * dz1[j]
    return loss / B


@njit(cache=True, nogil=True)
def _sgd_epoch(X, y, order, batch, lr, W1, b1, W2, b2, W3, b3):
    n, d = X.shape
    gW1 = np.empty_like(W1)
    gb1 = np.empty_like(b1)
    gW2 = np.empty_like(W2)
    gb2 = np.empty_like(b2)
    gW3 = np.empty_like(W3)
    gb3 = np.empty_like(b3)
    Xb = np.empty((batch, d))
    yb = np.empty(batch)
    total = 0.0
    for start in range(0, n, batch):
        stop = min(start + batch, n)
        m = stop - start
        for r in range(m):
            Xb[r, :] = X[order[start + r], :]
            yb[r] = y[order[start + r]]
        loss = batch_loss_grad(
            Xb[:m], yb[:m], W1, b1, W2, b2, W3, b3, gW1, gb1, gW2, gb2, gW3, gb3
        )
        total += loss * m
        W1 -= lr * gW1
        b1 -= lr * gb1
        W2 -= lr * gW2
        b2 -= lr * gb2
        W3 -= lr * gW3
        b3 -= lr * gb3
    return total / n


@njit(cache=True)
def _forward(X, W1, b1, W2, b2, W3, b3):
    a1 = np.maximum(X @ W1 + b1, 0.0)
    a2 = np.maximum(a1 @ W2 + b2, 0.0)
    return a2 @ W3 + b3[0]


@dataclass(frozen=True, eq=False)
class NetState:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray

    @property
    def params(self) -> tuple[np.ndarray, ...]:
        return (self.W1, self.b1, self.W2, self.b2, self.W3, self.b3)

    def predict(self, Z: np.ndarray) -> np.ndarray:
        """Raw network output for already standardized inputs."""
        return _forward(np.ascontiguousarray(Z, dtype=np.float64), *self.params)


def init_params(n_in: int, hidden: tuple[int, int], rng: np.random.Generator):
    """He-uniform hidden layers; the linear output layer starts at zero."""
    h1, h2 = hidden
    lim1 = np.sqrt(6.0 / n_in)
    lim2 = np.sqrt(6.0 / h1)
    W1 = rng.uniform(-lim1, lim1, (n_in, h1))
    W2 = rng.uniform(-lim2, lim2, (h1, h2))
    return [W1, np.zeros(h1), W2, np.zeros(h2), np.zeros(h2), np.zeros(1)]


def mse(state: NetState, Z: np.ndarray, t: np.ndarray) -> float:
    r = state.predict(Z) - t
    return float(np.mean(r * r))


def fit_mlp(
    Z: np.ndarray,
    t: np.ndarray,
    hidden: tuple[int, int] = (12, 12),
    epochs: int = 200,
    batch: int = 10,
    lr: float = 0.01,
    seed: int = 0,
    history: list | None = None,
) -> NetState:
    """Train on standardized inputs ``Z`` and standardized targets ``t``.

    Rows are reshuffled every epoch.  If ``history`` is given, the mean
    training loss of each epoch is appended to it.
    """
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    t = np.ascontiguousarray(t, dtype=np.float64)
    rng = np.random.default_rng(seed)
    params = init_params(Z.shape[1], tuple(hidden), rng)
    for epoch in range(epochs):
        order = rng.permutation(Z.shape[0])
        loss = _sgd_epoch(Z, t, order, batch, lr, *params)
        if not np.isfinite(loss) or not all(np.all(np.isfinite(p)) for p in params):
            raise NonFinite(
                f"training diverged in epoch {epoch + 1} (loss={loss}); lower the learning rate"
            )
        if history is not None:
            history.append(loss)
    return NetState(*params)
