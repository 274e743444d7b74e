"""Least squares, ridge and Gram-matrix summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ..errors import DesignError, InputError

# relative eigenvalue floor below which S_n is treated as singular
SINGULAR_RTOL = 1e-12


@dataclass(frozen=True)
class DesignSummary:
    lambda_min: float
    lambda_max: float
    L: float

    @property
    def condition(self) -> float:
        return self.lambda_max / self.lambda_min if self.lambda_min > 0 else np.inf


def as_design(X, y=None):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise InputError("design matrix must be two-dimensional")
    if not np.all(np.isfinite(X)):
        raise InputError("design matrix has non-finite entries")
    if y is None:
        return X
    y = np.asarray(y, dtype=float).ravel()
    if y.shape[0] != X.shape[0]:
        raise InputError(f"X has {X.shape[0]} rows but y has {y.shape[0]} entries")
    if not np.all(np.isfinite(y)):
        raise InputError("response has non-finite entries")
    return X, y


def gram(X) -> np.ndarray:
    X = as_design(X)
    return (X.T @ X) / X.shape[0]


def gram_summary(X) -> DesignSummary:
    """Extreme eigenvalues of ``S_n = X^T X / n`` and ``L = max_i ||x_i||_2``."""
    X = as_design(X)
    if X.shape[0] < 1:
        raise InputError("need at least one row")
    w = linalg.eigvalsh(gram(X))
    lam_min = max(float(w[0]), 0.0)
    lam_max = max(float(w[-1]), lam_min)
    L = float(np.max(np.sqrt(np.sum(X * X, axis=1))))
    return DesignSummary(lam_min, lam_max, L)


def check_nonsingular(X) -> DesignSummary:
    summary = gram_summary(X)
    if summary.lambda_max == 0 or summary.lambda_min <= SINGULAR_RTOL * summary.lambda_max:
        raise DesignError(
            f"empirical Gram matrix is singular (eigenvalues {summary.lambda_min:.3g}, "
            f"{summary.lambda_max:.3g})")
    return summary


def ols(X, y) -> np.ndarray:
    """Ordinary least squares through a Cholesky solve of the normal equations."""
    X, y = as_design(X, y)
    S = gram(X)
    b = X.T @ y / X.shape[0]
    try:
        c = linalg.cho_factor(S, lower=True, check_finite=False)
    except linalg.LinAlgError:
        raise DesignError("design matrix is singular") from None
    w = linalg.eigvalsh(S)
    if w[0] <= SINGULAR_RTOL * max(w[-1], np.finfo(float).tiny):
        raise DesignError("design matrix is singular")
    return linalg.cho_solve(c, b, check_finite=False)


def ridge_ls(X, y, lam: float) -> np.ndarray:
    """Solve ``(S_n + lam I) theta = X^T y / n``."""
    if lam < 0:
        raise InputError("ridge penalty must be non-negative")
    if lam == 0:
        return ols(X, y)
    X, y = as_design(X, y)
    d = X.shape[1]
    A = gram(X) + lam * np.eye(d)
    b = X.T @ y / X.shape[0]
    return linalg.solve(A, b, assume_a="pos", check_finite=False)


class GramSpectrum:
    """Eigendecomposition of S_n, for applying ``(S_n + c I)^{-1}`` for any c >= 0."""

    def __init__(self, X):
        self.S = gram(X)
        self.w, self.Q = linalg.eigh(self.S)
        self.w = np.maximum(self.w, 0.0)

    def inverse_apply(self, shift: float = 0.0):
        denom = self.w + shift
        if denom[0] <= SINGULAR_RTOL * max(denom[-1], np.finfo(float).tiny):
            raise DesignError("shifted Gram matrix is singular")
        Q = self.Q
        inv = 1.0 / denom

        def apply(v):
            return Q @ (inv * (Q.T @ v))

        return apply
