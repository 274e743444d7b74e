"""Joint Catoni estimators of a trend parameter and the noise scale.

All three estimators solve a pair of score equations in ``(theta, v)``::

    mean_i  x_i * psi1(alpha1 * r_i(theta) / v) - lam * theta = 0
    mean_i  psi2(alpha2 * (r_i(theta)^2 / v^2 - 1))            = 0

with ``r_i(theta) = y_i - <x_i, theta>``. The location model is the case
``x_i = 1``, plain regression has ``lam = 0`` and ridge has
``lam = lambda0 * alpha1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..errors import InputError
from ..influence import InfluenceSpec, psi
from ..solver import (SolveDiagnostics, SolveOptions, solve_coupled_scalar,
                      solve_scale, solve_score_fixed_point)
from .baselines import _as_sample, exact_mean
from .design import GramSpectrum, as_design, check_nonsingular, ols, ridge_ls
from .tuning import TuningParams

MAD_TO_SD = 1.4826
BRACKET_LOW = 1e-6
BRACKET_HIGH = 20.0
# residuals below this fraction of the response scale count as exact zeros
ZERO_RESIDUAL_RTOL = 1e-11


@dataclass
class JointFit:
    theta_hat: float
    v_hat: float
    diagnostics: SolveDiagnostics
    alpha1: float = math.nan
    alpha2: float = math.nan


@dataclass
class RegressionFit:
    coef: np.ndarray
    v_hat: float
    lam: float
    diagnostics: SolveDiagnostics
    alpha1: float = math.nan
    alpha2: float = math.nan
    lambda0: float = 0.0


def robust_scale(r) -> float:
    """1.4826 * MAD, falling back to the RMS deviation and then to 1."""
    r = np.asarray(r, dtype=float)
    med = np.median(r)
    s = MAD_TO_SD * float(np.median(np.abs(r - med)))
    if s > 0:
        return s
    s = float(np.sqrt(np.mean((r - r.mean()) ** 2)))
    return s if s > 0 else 1.0


def default_bracket(scale: float):
    return (BRACKET_LOW * scale, BRACKET_HIGH * scale)


class MeanEquations:
    """Score functions of the location/scale model.

    ``f1``/``f2`` take scalars and sum exactly (so odd-symmetric samples give
    an exact zero); ``f1_grid``/``f2_grid`` accept an array of theta values.
    """

    def __init__(self, data, alpha1, alpha2, spec: InfluenceSpec):
        self.x = np.asarray(data, dtype=float)
        self.alpha1, self.alpha2, self.spec = alpha1, alpha2, spec

    def f1(self, theta, v):
        return exact_mean(psi(self.spec.psi1, self.alpha1 * (self.x - theta) / v, 2.0))

    def f2(self, theta, v):
        z = (self.x - theta) / v
        return exact_mean(psi(self.spec.psi2, self.alpha2 * (z * z - 1.0), self.spec.beta))

    def f1_grid(self, thetas, v):
        t = np.asarray(thetas, dtype=float)[:, None]
        return psi(self.spec.psi1, self.alpha1 * (self.x[None, :] - t) / v, 2.0).mean(axis=1)

    def f2_grid(self, thetas, v):
        t = np.asarray(thetas, dtype=float)[:, None]
        z = (self.x[None, :] - t) / v
        return psi(self.spec.psi2, self.alpha2 * (z * z - 1.0), self.spec.beta).mean(axis=1)


def joint_mean_variance(data, tp: TuningParams = TuningParams(),
                        spec: InfluenceSpec = InfluenceSpec(),
                        opts: SolveOptions = SolveOptions()) -> JointFit:
    """Jointly estimate the mean and standard deviation of ``data``.

    ``spec.beta`` is the order of psi2; ``tp.beta`` sets alpha1 and alpha2.
    Starts from the median and 1.4826 * MAD. Constant data carry no scale
    information: the constant is returned with ``v`` pinned at the lower end
    of the bracket and ``degenerate_scale`` set.
    """
    x = _as_sample(data, min_n=4)
    n = x.size
    alpha1, alpha2 = tp.alphas(n)
    eq = MeanEquations(x, alpha1, alpha2, spec)
    med = float(np.median(x))
    scale = robust_scale(x)
    bracket = opts.v_bracket or default_bracket(scale)
    lo, hi = float(x.min()), float(x.max())

    if lo == hi:
        diag = SolveDiagnostics(outer_iterations=0, residual_1=0.0,
                                residual_2=abs(eq.f2(lo, bracket[0])),
                                converged=False, degenerate_scale=True)
        return JointFit(lo, bracket[0], diag, alpha1, alpha2)

    theta, v, diag = solve_coupled_scalar(eq.f1, eq.f2, (med, scale),
                                          replace(opts, v_bracket=bracket),
                                          theta_bracket=(lo, hi))
    return JointFit(theta, v, diag, alpha1, alpha2)


class LinearEquations:
    """Score functions of the (possibly ridge-penalised) linear model."""

    def __init__(self, X, y, alpha1, alpha2, spec: InfluenceSpec, lam=0.0):
        self.X, self.y = X, y
        self.n = X.shape[0]
        self.alpha1, self.alpha2, self.spec, self.lam = alpha1, alpha2, spec, lam

    def f1(self, theta, v):
        r = self.y - self.X @ theta
        w = psi(self.spec.psi1, self.alpha1 * r / v, 2.0)
        return self.X.T @ w / self.n - self.lam * theta

    def f2_residuals(self, r, v):
        z = r / v
        return float(np.mean(psi(self.spec.psi2, self.alpha2 * (z * z - 1.0), self.spec.beta)))

    def f2(self, theta, v):
        return self.f2_residuals(self.y - self.X @ theta, v)


def _joint_linear(X, y, tp, spec, opts, lambda0):
    X, y = as_design(X, y)
    n, d = X.shape
    if n <= d:
        raise InputError(f"need n > d, got n={n}, d={d}")
    if lambda0 < 0:
        raise InputError("lambda0 must be non-negative")
    if lambda0 == 0:
        check_nonsingular(X)
    alpha1, alpha2 = tp.alphas(n, d)
    lam = lambda0 * alpha1
    eq = LinearEquations(X, y, alpha1, alpha2, spec, lam)
    spectrum = GramSpectrum(X)

    if lambda0 == 0:
        theta = ols(X, y)
    else:
        pilot = ridge_ls(X, y, lambda0)
        theta = ridge_ls(X, y, lambda0 * robust_scale(y - X @ pilot))
    r = y - X @ theta
    y_scale = 1.0 + float(np.max(np.abs(y)))
    zero_fit = float(np.max(np.abs(r))) <= ZERO_RESIDUAL_RTOL * y_scale
    scale = robust_scale(r) if not zero_fit else max(robust_scale(y), 1.0)
    v_lo, v_hi = opts.v_bracket or default_bracket(scale)
    v = min(max(scale, v_lo), v_hi)

    def finish(theta, v, diag):
        return RegressionFit(theta, v, lam, diag, alpha1, alpha2, lambda0)

    if zero_fit:
        diag = SolveDiagnostics(0, float(np.max(np.abs(eq.f1(theta, v_lo)))),
                                abs(eq.f2(theta, v_lo)), False, True)
        return finish(theta, v_lo, diag)

    diag = SolveDiagnostics()
    damping = opts.damping
    prev_res = math.inf
    for k in range(1, opts.max_outer + 1):
        inv = spectrum.inverse_apply(lam * v / alpha1)
        theta_new, _ = solve_score_fixed_point(lambda t, _v=v: eq.f1(t, _v), inv,
                                               v / alpha1, theta, opts)
        r = y - X @ theta_new
        v_root, degenerate = solve_scale(lambda s: eq.f2_residuals(r, s), v_lo, v_hi)
        v_new = v_root if degenerate else v + damping * (v_root - v)
        res1 = float(np.max(np.abs(eq.f1(theta_new, v_new))))
        res2 = abs(eq.f2_residuals(r, v_new))
        step_theta = float(np.max(np.abs(theta_new - theta)))
        step_v = abs(v_new - v)
        theta, v = theta_new, v_new
        diag.outer_iterations = k
        diag.residual_1, diag.residual_2 = res1, res2
        diag.degenerate_scale = degenerate
        if degenerate:
            break
        res = max(res1, res2)
        if res <= opts.tol_residual:
            diag.converged = True
            break
        if res > prev_res and damping > 1 / 64:
            damping = max(damping / 2, 1 / 64)
        prev_res = res
        if (step_theta <= opts.tol_step * (1.0 + float(np.max(np.abs(theta))))
                and step_v <= opts.tol_step * v):
            break
    return finish(theta, v, diag)


def joint_regression(X, y, tp: TuningParams = TuningParams(),
                     spec: InfluenceSpec = InfluenceSpec(),
                     opts: SolveOptions = SolveOptions()) -> RegressionFit:
    """Joint Catoni estimate of regression coefficients and noise scale.

    Alternates a quasi-Newton fixed point for the coefficients (Gram matrix
    as the Hessian surrogate) with bisection for the scale. Starts from OLS.
    Noise-free data (all OLS residuals numerically zero) return the OLS fit
    with ``degenerate_scale`` set.
    """
    return _joint_linear(X, y, tp, spec, opts, 0.0)


def joint_ridge(X, y, tp: TuningParams = TuningParams(),
                spec: InfluenceSpec = InfluenceSpec(), lambda0: float = 0.0,
                opts: SolveOptions = SolveOptions()) -> RegressionFit:
    """Ridge-penalised joint Catoni estimate with ``lam = lambda0 * alpha1``."""
    return _joint_linear(X, y, tp, spec, opts, float(lambda0))
