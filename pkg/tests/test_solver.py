"""Root finding, alternating coupled solves, fixed points and grid oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jointcatoni import InputError, NumericError
from jointcatoni.estimators import TuningParams
from jointcatoni.influence import WIDE, psi
from jointcatoni.solver import (SolveOptions, find_root_monotone, grid_oracle,
                                nested_grid_oracle, solve_coupled_scalar,
                                solve_score_fixed_point, solve_scale)


def mean_equations(x, n_alpha=None, beta=2.0, eps=0.01):
    """Independent transcription of the coupled mean/scale scores."""
    n = x.size
    a1 = math.sqrt(math.log(n ** (1 / beta - 0.5) / eps) / n)
    a2 = (math.log(1 / eps) / n) ** (1 / beta)

    def wide(z):
        return np.sign(z) * np.log1p(np.abs(z) + np.abs(z) ** beta / beta)

    def f1(theta, v):
        t = np.atleast_1d(theta)[:, None]
        out = wide(a1 * (x[None, :] - t) / v).mean(axis=1)
        return out if np.ndim(theta) else float(out[0])

    def f2(theta, v):
        t = np.atleast_1d(theta)[:, None]
        out = wide(a2 * ((x[None, :] - t) ** 2 / v ** 2 - 1)).mean(axis=1)
        return out if np.ndim(theta) else float(out[0])

    return f1, f2


def mad_box(x):
    med = float(np.median(x))
    s = 1.4826 * float(np.median(np.abs(x - med)))
    return (med - s, med + s), (0.4 * s, 1.6 * s), s


class TestFindRootMonotone:
    def test_linear(self):
        res = find_root_monotone(lambda x: x - 3, 0, 10, tol=1e-12)
        assert res.bracketed
        assert res.root == pytest.approx(3, abs=1e-12)

    def test_psi_target(self):
        f = lambda x: float(psi(WIDE, x)) - 0.5
        res = find_root_monotone(f, 0, 5)
        assert abs(f(res.root)) <= 1e-9
        # closed form: 1 + x + x^2/2 = e^0.5
        want = -1 + math.sqrt(1 - 2 * (1 - math.exp(0.5)))
        assert res.root == pytest.approx(want, abs=1e-12)

    def test_no_sign_change(self):
        res = find_root_monotone(lambda x: x * x + 1, -1, 1)
        assert not res.bracketed
        assert res.root in (-1, 1)

    def test_bad_interval(self):
        with pytest.raises(InputError):
            find_root_monotone(lambda x: x, 1, 1)

    def test_non_finite(self):
        with pytest.raises(NumericError):
            find_root_monotone(lambda x: math.nan, 0, 1)

    def test_scaled_linear(self):
        for c in (1e-3, 0.7, 3.0, 1e5):
            assert find_root_monotone(lambda x: c * (x - 3), 0, 10).root == \
                find_root_monotone(lambda x: x - 3, 0, 10).root

    def test_decreasing(self):
        res = find_root_monotone(lambda x: 2 - x, -5, 5)
        assert res.root == pytest.approx(2, abs=1e-12)

    @settings(max_examples=100, deadline=None)
    @given(k=st.integers(-30, 30), j=st.integers(-400, 400))
    def test_positive_scaling_invariance(self, k, j):
        # power-of-two factors scale exactly, so only the sign path matters
        c, r = 2.0 ** k, j / 8
        f = lambda x: math.atan(x - r)
        assert find_root_monotone(f, -100, 100).root == \
            find_root_monotone(lambda x: c * f(x), -100, 100).root


class TestSolveScale:
    def test_degenerate_when_negative_everywhere(self):
        v, degenerate = solve_scale(lambda v: -1.0, 0.1, 10)
        assert degenerate and v == 0.1

    def test_expands_upward(self):
        v, degenerate = solve_scale(lambda v: 1000.0 / v ** 2 - 1, 0.1, 1.0)
        assert not degenerate
        assert v == pytest.approx(math.sqrt(1000), rel=1e-12)


class TestCoupledScalar:
    def test_decoupled_system(self):
        f1 = lambda t, v: 2.0 - t
        f2 = lambda t, v: 9.0 / v ** 2 - 1
        theta, v, diag = solve_coupled_scalar(f1, f2, (0.0, 1.0),
                                              SolveOptions(v_bracket=(0.1, 10.0)))
        assert diag.converged
        assert theta == pytest.approx(2, abs=1e-9)
        assert v == pytest.approx(3, abs=1e-9)

    def test_symmetric_data_gives_exact_zero(self):
        x = np.array([-1.0, 1.0] * 25)
        f1, f2 = mean_equations(x)
        theta, v, diag = solve_coupled_scalar(f1, f2, (0.0, 1.0),
                                              SolveOptions(v_bracket=(1e-3, 20.0)))
        assert theta == 0.0

    def test_requires_bracket(self):
        with pytest.raises(InputError):
            solve_coupled_scalar(lambda t, v: -t, lambda t, v: 1 / v - 1, (0, 1))

    def test_residual_contract(self):
        x = np.random.default_rng(4).standard_t(5, 200)
        f1, f2 = mean_equations(x)
        opts = SolveOptions(v_bracket=(1e-3, 50.0))
        theta, v, diag = solve_coupled_scalar(f1, f2, (float(np.median(x)), 1.0), opts)
        assert diag.converged
        assert max(abs(f1(theta, v)), abs(f2(theta, v))) <= opts.tol_residual

    def test_deterministic(self):
        x = np.random.default_rng(8).standard_normal(80)
        f1, f2 = mean_equations(x)
        opts = SolveOptions(v_bracket=(1e-3, 50.0))
        a = solve_coupled_scalar(f1, f2, (0.0, 1.0), opts)
        b = solve_coupled_scalar(f1, f2, (0.0, 1.0), opts)
        assert a[0] == b[0] and a[1] == b[1]

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_grid_oracle(self, seed):
        x = np.random.default_rng(seed).standard_normal(50)
        f1, f2 = mean_equations(x)
        tb, vb, s = mad_box(x)
        res = 200
        theta_o, v_o = grid_oracle(f1, f2, (tb, vb), res, vectorized=True)
        theta, v, diag = solve_coupled_scalar(f1, f2, (float(np.median(x)), s),
                                              SolveOptions(v_bracket=(1e-6 * s, 20 * s)))
        assert diag.converged
        assert abs(theta - theta_o) <= 2 * (tb[1] - tb[0]) / (res - 1)
        assert abs(v - v_o) <= 2 * (vb[1] - vb[0]) / (res - 1)


class TestFixedPoint:
    def test_linear_score_one_step(self):
        S = np.array([[2.0, 0.5], [0.5, 1.0]])
        target = np.array([1.0, -2.0])
        inv = np.linalg.inv(S)
        theta, diag = solve_score_fixed_point(lambda t: S @ (target - t), lambda g: inv @ g,
                                              1.0, np.zeros(2), SolveOptions(), max_iter=1)
        np.testing.assert_allclose(theta, target, atol=1e-12)
        assert diag.converged

    def test_noise_free_fixed_point(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((40, 3))
        ts = np.array([1.0, 0.0, -1.5])
        y = X @ ts
        score = lambda t: X.T @ psi(WIDE, y - X @ t) / 40
        inv = np.linalg.inv(X.T @ X / 40)
        theta, diag = solve_score_fixed_point(score, lambda g: inv @ g, 1.0, ts)
        np.testing.assert_array_equal(theta, ts)
        assert diag.converged and diag.outer_iterations == 0

    def test_matches_nested_oracle_at_fixed_v(self):
        rng = np.random.default_rng(21)
        n, d = 100, 2
        X = rng.standard_normal((n, d))
        y = X @ np.array([1.0, -0.5]) + rng.standard_t(5, n)
        tp = TuningParams(beta=2.0)
        a1, _ = tp.alphas(n, d)
        v = 1.3

        def f1(t, _v=v):
            t = np.asarray(t, dtype=float)
            if t.ndim == 1:
                return X.T @ psi(WIDE, a1 * (y - X @ t) / _v) / n
            return psi(WIDE, a1 * (y[None, :] - t @ X.T) / _v) @ X / n

        inv = np.linalg.inv(X.T @ X / n)
        theta, diag = solve_score_fixed_point(f1, lambda g: inv @ g, v / a1,
                                              np.linalg.lstsq(X, y, rcond=None)[0])
        assert diag.converged
        oracle, _ = nested_grid_oracle(f1, lambda t, _v: np.zeros(len(t)),
                                       (((-1.0, 3.0), (-2.5, 1.5)), (v, v)),
                                       resolution=41, levels=14, vectorized=True)
        np.testing.assert_allclose(theta, oracle, atol=1e-4)


class TestGridOracle:
    def test_decoupled_root(self):
        f1 = lambda t, v: 2.0 - t
        f2 = lambda t, v: 9.0 / v ** 2 - 1
        theta, v = grid_oracle(f1, f2, ((0.0, 4.0), (1.0, 5.0)), 401)
        assert abs(theta - 2) <= 0.01 and abs(v - 3) <= 0.01

    def test_root_outside_box(self):
        f1 = lambda t, v: 2.0 - t
        f2 = lambda t, v: 9.0 / v ** 2 - 1
        theta, v = grid_oracle(f1, f2, ((5.0, 6.0), (1.0, 2.0)), 16)
        assert theta == 5.0
        assert max(abs(f1(theta, v)), abs(f2(theta, v))) > 1e-9

    def test_resolution_floor(self):
        with pytest.raises(InputError):
            grid_oracle(lambda t, v: t, lambda t, v: v, ((0, 1), (1, 2)), 8)

    def test_too_many_coordinates(self):
        with pytest.raises(InputError):
            grid_oracle(lambda t, v: t, lambda t, v: v, (((0, 1),) * 3, (1, 2)), 16)
