"""Epsilon-insensitive support vector regression with an RBF kernel.

The dual is solved by sequential minimal optimization over the 2n box
variables ``a = [alpha; alpha*]`` with labels ``z = [+1; -1]``:

    min  1/2 a' Q a + p' a   s.t.  z' a = 0,  0 <= a <= C
    Q_st = z_s z_t K(x_s, x_t),   p = [eps - y; eps + y]

Working pairs are picked by maximal violation for the first index and
second-order gain for the second.  The regression function is
``f(x) = sum_i beta_i K(x_i, x) + b`` with ``beta = alpha - alpha*``.

Because ``sum(beta) = 0`` throughout, ``K`` may be replaced by ``K - 1``
without changing gradients or predictions.  With small ``gamma`` the RBF is
within 1e-4 of 1 everywhere, so working with ``expm1`` keeps the informative
part of the kernel at full precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..errors import NonConvergence

TAU = 1e-12


@njit(cache=True)
def _shifted_row(X, i, gamma, out):
    n, d = X.shape
    for t in range(n):
        s = 0.0
        for k in range(d):
            diff = X[i, k] - X[t, k]
            s += diff * diff
        out[t] = math.expm1(-gamma * s)


@njit(cache=True)
def _shifted_cross(A, B, gamma):
    out = np.empty((A.shape[0], B.shape[0]))
    for i in range(A.shape[0]):
        for t in range(B.shape[0]):
            s = 0.0
            for k in range(A.shape[1]):
                diff = A[i, k] - B[t, k]
                s += diff * diff
            out[i, t] = math.expm1(-gamma * s)
    return out


@njit(cache=True, nogil=True)
def _smo(X, y, C, gamma, eps, tol, max_iter, a, G):
    n = X.shape[0]
    m = 2 * n
    Ki = np.empty(n)
    Kj = np.empty(n)
    it = 0
    converged = False
    while it < max_iter:
        # first index: maximal violation in the "up" set
        g_max = -np.inf
        i = -1
        for t in range(m):
            if t < n:
                if a[t] < C and -G[t] >= g_max:
                    g_max = -G[t]
                    i = t
            else:
                if a[t] > 0.0 and G[t] >= g_max:
                    g_max = G[t]
                    i = t
        if i < 0:
            converged = True
            break
        zi = 1.0 if i < n else -1.0
        _shifted_row(X, i % n, gamma, Ki)

        # second index: best second-order decrease in the "low" set
        g_max2 = -np.inf
        j = -1
        obj_min = np.inf
        for t in range(m):
            kit = Ki[t % n]
            quad = -2.0 * kit
            if quad <= 0.0:
                quad = TAU
            if t < n:
                if a[t] > 0.0:
                    diff = g_max + G[t]
                    if G[t] >= g_max2:
                        g_max2 = G[t]
                    if diff > 0.0:
                        obj = -diff * diff / quad
                        if obj <= obj_min:
                            j = t
                            obj_min = obj
            else:
                if a[t] < C:
                    diff = g_max - G[t]
                    if -G[t] >= g_max2:
                        g_max2 = -G[t]
                    if diff > 0.0:
                        obj = -diff * diff / quad
                        if obj <= obj_min:
                            j = t
                            obj_min = obj
        if g_max + g_max2 < tol or j < 0:
            converged = True
            break
        it += 1
        zj = 1.0 if j < n else -1.0
        _shifted_row(X, j % n, gamma, Kj)

        quad = -2.0 * Ki[j % n]
        if quad <= 0.0:
            quad = TAU
        ai_old = a[i]
        aj_old = a[j]
        if zi != zj:
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0.0:
                if a[j] < 0.0:
                    a[j] = 0.0
                    a[i] = diff
            else:
                if a[i] < 0.0:
                    a[i] = 0.0
                    a[j] = -diff
            if diff > 0.0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            else:
                if a[j] > C:
                    a[j] = C
                    a[i] = C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = total - C
            else:
                if a[j] < 0.0:
                    a[j] = 0.0
                    a[i] = total
            if total > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = total - C
            else:
                if a[i] < 0.0:
                    a[i] = 0.0
                    a[j] = total
        dai = a[i] - ai_old
        daj = a[j] - aj_old
        ci = zi * dai
        cj = zj * daj
        for t in range(n):
            v = ci * Ki[t] + cj * Kj[t]
            G[t] += v
            G[t + n] -= v

    # offset from free variables, else midpoint of the feasible interval
    ub = np.inf
    lb = -np.inf
    n_free = 0
    s_free = 0.0
    for t in range(m):
        zt = 1.0 if t < n else -1.0
        yg = zt * G[t]
        if a[t] >= C:
            if zt < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif a[t] <= 0.0:
            if zt > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            s_free += yg
    if n_free > 0:
        rho = s_free / n_free
    else:
        rho = 0.5 * (ub + lb)
    return it, converged, rho


@njit(cache=True, nogil=True)
def _predict(S, beta, b, gamma, X):
    out = np.empty(X.shape[0])
    for r in range(X.shape[0]):
        acc = 0.0
        for i in range(S.shape[0]):
            s = 0.0
            for k in range(S.shape[1]):
                diff = S[i, k] - X[r, k]
                s += diff * diff
            acc += beta[i] * math.expm1(-gamma * s)
        out[r] = acc + b
    return out


@njit(cache=True, nogil=True)
def _gradient(X, y, eps, gamma, a):
    n = X.shape[0]
    beta = a[:n] - a[n:]
    nz = np.nonzero(beta)[0]
    G = np.empty(2 * n)
    for t in range(n):
        acc = 0.0
        for s in nz:
            d2 = 0.0
            for k in range(X.shape[1]):
                diff = X[t, k] - X[s, k]
                d2 += diff * diff
            acc += beta[s] * math.expm1(-gamma * d2)
        G[t] = acc + eps - y[t]
        G[t + n] = -acc + eps + y[t]
    return G


@dataclass(frozen=True, eq=False)
class SVRState:
    """Support vectors (standardized), their dual coefficients and the offset.

    ``support_hours`` records which training rows the support vectors came
    from so a later refit on a superset of rows can start from this solution.
    """

    support: np.ndarray
    beta: np.ndarray
    bias: float
    gamma: float
    support_hours: np.ndarray | None = None
    iterations: int = 0

    def predict(self, Z: np.ndarray) -> np.ndarray:
        Z = np.ascontiguousarray(Z, dtype=np.float64)
        # adding sum(beta) (zero up to rounding) restores the unshifted kernel
        shifted = _predict(self.support, self.beta, self.bias, self.gamma, Z)
        return shifted + float(np.sum(self.beta))


def warm_start_duals(prev: SVRState, hours: np.ndarray, C: float) -> np.ndarray | None:
    """Previous dual solution laid out over a new training set, or None if
    some old support vector is not among the new rows."""
    if prev.support_hours is None or np.any(np.abs(prev.beta) > C):
        return None
    n = hours.size
    pos = np.searchsorted(hours, prev.support_hours)
    if np.any(pos >= n) or np.any(hours[np.minimum(pos, n - 1)] != prev.support_hours):
        return None
    a = np.zeros(2 * n)
    a[pos] = np.maximum(prev.beta, 0.0)
    a[n + pos] = np.maximum(-prev.beta, 0.0)
    return a


def fit_svr(
    Z: np.ndarray,
    t: np.ndarray,
    C: float = 1000.0,
    gamma: float = 1e-5,
    epsilon: float = 0.01,
    tol: float = 1e-3,
    max_iter: int = 100_000,
    hours: np.ndarray | None = None,
    init: np.ndarray | None = None,
) -> SVRState:
    """Solve the dual on standardized inputs ``Z`` and targets ``t``.

    ``init`` is an optional feasible starting point ``[alpha; alpha*]``;
    ``max_iter`` caps the number of pair updates.
    """
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    t = np.ascontiguousarray(t, dtype=np.float64)
    n = Z.shape[0]
    if init is None:
        a = np.zeros(2 * n)
        G = np.concatenate([epsilon - t, epsilon + t])
    else:
        a = np.clip(np.array(init, dtype=np.float64), 0.0, C)
        G = _gradient(Z, t, float(epsilon), float(gamma), a)
    it, converged, rho = _smo(Z, t, float(C), float(gamma), float(epsilon), tol, max_iter, a, G)
    if not converged:
        raise NonConvergence(f"SMO did not reach tolerance {tol} within {max_iter} iterations")
    beta = a[:n] - a[n:]
    keep = beta != 0.0
    sv_hours = None if hours is None else np.asarray(hours, dtype=np.int64)[keep].copy()
    return SVRState(Z[keep].copy(), beta[keep].copy(), float(-rho), float(gamma), sv_hours, int(it))


def rbf_kernel(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    """Plain (unshifted) RBF Gram matrix."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    B = np.ascontiguousarray(B, dtype=np.float64)
    return _shifted_cross(A, B, gamma) + 1.0
