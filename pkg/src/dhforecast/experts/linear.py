"""Ordinary least squares with intercept, solved through a QR factorization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from ..errors import Singular

# relative pivot size below which R is treated as rank deficient
RANK_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class LinearState:
    intercept: float
    coef: np.ndarray

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.intercept + np.asarray(X, dtype=np.float64) @ self.coef


def fit_linear(X: np.ndarray, y: np.ndarray) -> LinearState:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    if n <= d:
        raise Singular(f"{n} rows cannot determine {d} coefficients plus intercept")
    # Centring before the factorization keeps the intercept column from
    # dominating R when feature magnitudes are large (e.g. day of year).
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    A = np.column_stack([np.ones(n), X - x_mean])
    Q, R = np.linalg.qr(A, mode="reduced")
    diag = np.abs(np.diag(R))
    col_norm = np.linalg.norm(A, axis=0)
    if np.any(diag <= RANK_TOL * np.maximum(col_norm, 1.0)):
        raise Singular("design matrix is rank deficient")
    beta = solve_triangular(R, Q.T @ (y - y_mean))
    coef = beta[1:]
    intercept = y_mean + beta[0] - x_mean @ coef
    return LinearState(float(intercept), coef)
