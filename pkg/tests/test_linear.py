import numpy as np
import pytest

from dhforecast.errors import Singular
from dhforecast.experts.linear import fit_linear

from oracles import normal_equations


class TestLinear:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_normal_equations(self, seed):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(200, 8))
        y = X @ rng.normal(size=8) + 3.0 + rng.normal(0, 0.1, 200)
        state = fit_linear(X, y)
        expected = normal_equations(X, y)
        np.testing.assert_allclose(state.intercept, expected[0], rtol=1e-8, atol=1e-8)
        np.testing.assert_allclose(state.coef, expected[1:], rtol=1e-8, atol=1e-8)

    def test_exact_fit_recovers_coefficients(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(0, 365, size=(50, 3))
        coef = np.array([0.5, -2.0, 10.0])
        state = fit_linear(X, 7.0 + X @ coef)
        np.testing.assert_allclose(state.coef, coef, rtol=1e-10)
        np.testing.assert_allclose(state.intercept, 7.0, rtol=1e-8)

    def test_constant_column_is_singular(self):
        X = np.column_stack([np.arange(10.0), np.ones(10)])
        with pytest.raises(Singular):
            fit_linear(X, np.arange(10.0))

    def test_collinear_columns(self):
        x = np.arange(20.0)
        with pytest.raises(Singular):
            fit_linear(np.column_stack([x, 2 * x]), x)

    def test_too_few_rows(self):
        with pytest.raises(Singular):
            fit_linear(np.ones((2, 2)), np.ones(2))
