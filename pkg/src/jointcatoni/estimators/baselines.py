"""Comparison estimators: sample moments, classical Catoni and adaptive Huber."""

from __future__ import annotations

import math

import numpy as np
from scipy import linalg

from ..errors import DesignError, InputError, NumericError
from ..influence import WIDE, Variant, psi
from ..solver import find_root_monotone
from .design import as_design

IRLS_MAX_ITER = 500
IRLS_TOL = 1e-10


def _as_sample(data, min_n=1):
    x = np.asarray(data, dtype=float).ravel()
    if x.size < min_n:
        raise InputError(f"need at least {min_n} observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise InputError("data contain non-finite values")
    return x


def sample_mean_var(data):
    """Arithmetic mean and the 1/n variance (``nan`` variance when n = 1)."""
    x = _as_sample(data)
    mean = math.fsum(x) / x.size
    if x.size < 2:
        return mean, math.nan
    c = x - mean
    return mean, math.fsum(c * c) / x.size


def exact_mean(values) -> float:
    """Mean whose sign is always right; odd-symmetric sums come out exactly zero.

    A plain sum is used when its worst-case rounding error cannot reach zero,
    otherwise the correctly rounded ``math.fsum``.
    """
    v = np.asarray(values, dtype=float)
    s = float(v.sum())
    if abs(s) > v.size * 2.3e-16 * float(np.abs(v).sum()):
        return s / v.size
    return math.fsum(v.tolist()) / v.size


def catoni_location(x, alpha, variant: Variant = WIDE):
    """Root in theta of ``mean psi1(alpha (x - theta)) = 0`` on ``[min x, max x]``."""
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        return lo

    def f(t):
        return exact_mean(psi(variant, alpha * (x - t), 2.0))

    return find_root_monotone(f, lo, hi).root


def catoni_mean(data, eps: float, sigma: float, variant: Variant = WIDE) -> float:
    """Catoni's M-estimator of the mean with known ``sigma``.

    Uses ``alpha = sqrt(2 log(1/eps) / n) / sigma``.
    """
    x = _as_sample(data)
    if not sigma > 0:
        raise InputError("sigma must be positive")
    if not 0 < eps < 1:
        raise InputError("eps must lie in (0, 1)")
    alpha = math.sqrt(2.0 * math.log(1.0 / eps) / x.size) / sigma
    return catoni_location(x, alpha, variant)


def catoni_mean_sample_sigma(data, eps: float, variant: Variant = WIDE) -> float:
    """:func:`catoni_mean` with sigma replaced by the 1/n sample standard deviation."""
    x = _as_sample(data, min_n=2)
    _, var = sample_mean_var(x)
    if var == 0.0:
        raise InputError("sample variance is zero")
    return catoni_mean(x, eps, math.sqrt(var), variant)


def huber_tau(y, c1: float = 1.0) -> float:
    """Adaptive Huber threshold ``c1 * sigma_bar * sqrt(n / log n)``."""
    y = _as_sample(y, min_n=3)
    if not c1 > 0:
        raise InputError("c1 must be positive")
    _, var = sample_mean_var(y)
    if var == 0.0:
        raise InputError("response has zero sample variance")
    n = y.size
    return c1 * math.sqrt(var) * math.sqrt(n / math.log(n))


def huber_tau_from_stats(sigma_bar: float, n: float, c1: float = 1.0) -> float:
    return c1 * sigma_bar * math.sqrt(n / math.log(n))


def adaptive_huber(X, y, tau: float, lam: float = 0.0, init=None,
                   max_iter: int = IRLS_MAX_ITER, tol: float = IRLS_TOL) -> np.ndarray:
    """Minimise ``mean(huber_tau(y - X theta)) + lam/2 ||theta||^2`` by IRLS.

    Weights are ``min(1, tau / |r_i|)``; every iteration solves the weighted,
    penalised normal equations exactly. Raises :class:`NumericError` if the
    coefficient step does not fall below ``tol`` (relative to the coefficient
    size) within ``max_iter`` iterations.
    """
    X, y = as_design(X, y)
    if not tau > 0:
        raise InputError("tau must be positive")
    if lam < 0:
        raise InputError("lam must be non-negative")
    n, d = X.shape
    eye = np.eye(d)

    def weighted_solve(w):
        Xw = X * w[:, None]
        A = X.T @ Xw / n + lam * eye
        b = Xw.T @ y / n
        try:
            return linalg.solve(A, b, assume_a="pos", check_finite=False)
        except linalg.LinAlgError:
            raise DesignError("weighted normal equations are singular") from None

    theta = weighted_solve(np.ones(n)) if init is None else np.array(init, dtype=float)
    for _ in range(max_iter):
        r = np.abs(y - X @ theta)
        w = np.ones(n)
        big = r > tau
        w[big] = tau / r[big]
        new = weighted_solve(w)
        step = float(np.max(np.abs(new - theta)))
        theta = new
        if not np.all(np.isfinite(theta)):
            raise NumericError("IRLS produced non-finite coefficients")
        if step <= tol * max(1.0, float(np.max(np.abs(theta)))):
            return theta
    raise NumericError(f"adaptive Huber IRLS did not converge in {max_iter} iterations")
