"""Derivative-free machinery for the coupled location/scale score equations.

The trend equation is non-increasing in the location and the scale equation
is non-increasing in the scale, so each one-dimensional sub-problem is a
monotone root search. Bisection is used throughout because the narrow
influence functions have kinks at ``|x| = 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import InputError, NumericError

__all__ = [
    "SolveOptions",
    "SolveDiagnostics",
    "RootResult",
    "find_root_monotone",
    "solve_coupled_scalar",
    "solve_score_fixed_point",
    "solve_scale",
    "grid_oracle",
    "nested_grid_oracle",
]

DAMPING_FLOOR = 1.0 / 64.0


@dataclass(frozen=True)
class SolveOptions:
    tol_residual: float = 1e-9
    tol_step: float = 1e-10
    max_outer: int = 200
    v_bracket: Optional[Tuple[float, float]] = None
    damping: float = 1.0

    def __post_init__(self):
        if not (self.tol_residual > 0 and self.tol_step > 0):
            raise InputError("tolerances must be positive")
        if self.max_outer < 1:
            raise InputError("max_outer must be at least 1")
        if not 0.0 < self.damping <= 1.0:
            raise InputError("damping must lie in (0, 1]")
        if self.v_bracket is not None:
            lo, hi = self.v_bracket
            if not 0.0 < lo < hi:
                raise InputError(f"v_bracket must satisfy 0 < v_lo < v_hi, got {self.v_bracket}")


@dataclass
class SolveDiagnostics:
    outer_iterations: int = 0
    residual_1: float = math.nan
    residual_2: float = math.nan
    converged: bool = False
    degenerate_scale: bool = False


@dataclass(frozen=True)
class RootResult:
    """Outcome of a monotone bisection.

    ``bracketed`` is False when ``f`` had the same strict sign at both ends; the
    root is then the endpoint with the smaller ``|f|``.
    """

    root: float
    value: float
    bracketed: bool
    iterations: int


def _finite(v, where):
    if not math.isfinite(v):
        raise NumericError(f"non-finite function value at {where}")
    return v


def find_root_monotone(f: Callable[[float], float], lo: float, hi: float,
                       tol: float = 0.0, max_iter: int = 2000) -> RootResult:
    """Bisection for a continuous monotone ``f`` on ``[lo, hi]``.

    Only the signs of ``f`` steer the search, so the path is unchanged when
    ``f`` is multiplied by a positive constant. The returned point is the one
    with the smallest ``|f|`` seen along the path. ``tol=0`` bisects until the
    bracket cannot be split in floating point.
    """
    if not lo < hi:
        raise InputError(f"need lo < hi, got [{lo}, {hi}]")
    flo = _finite(float(f(lo)), lo)
    fhi = _finite(float(f(hi)), hi)
    if flo == 0.0:
        return RootResult(lo, 0.0, True, 0)
    if fhi == 0.0:
        return RootResult(hi, 0.0, True, 0)
    if (flo > 0) == (fhi > 0):
        if abs(flo) <= abs(fhi):
            return RootResult(lo, flo, False, 0)
        return RootResult(hi, fhi, False, 0)

    lo_positive = flo > 0
    best_x, best_f = (lo, flo) if abs(flo) <= abs(fhi) else (hi, fhi)
    it = 0
    while hi - lo > tol and it < max_iter:
        mid = lo + 0.5 * (hi - lo)
        if mid <= lo or mid >= hi:
            break
        it += 1
        fm = _finite(float(f(mid)), mid)
        if abs(fm) < abs(best_f):
            best_x, best_f = mid, fm
        if fm == 0.0:
            break
        if (fm > 0) == lo_positive:
            lo = mid
        else:
            hi = mid
    return RootResult(best_x, best_f, True, it)


def _expand_bracket(f, center, width, decreasing=True, max_doublings=200):
    """Grow ``[center - width, center + width]`` until ``f`` changes sign."""
    width = max(width, 1e-300)
    for _ in range(max_doublings):
        lo, hi = center - width, center + width
        flo, fhi = float(f(lo)), float(f(hi))
        if not (math.isfinite(flo) and math.isfinite(fhi)):
            raise NumericError("non-finite value while bracketing the location root")
        if (flo >= 0 >= fhi) if decreasing else (flo <= 0 <= fhi):
            return lo, hi
        width *= 2.0
    raise NumericError("could not bracket the location root")


def solve_scale(f2v: Callable[[float], float], v_lo: float, v_hi: float,
                max_expand: int = 64) -> Tuple[float, bool]:
    """Root of a non-increasing scale equation on ``[v_lo, v_hi]``.

    Returns ``(v, degenerate)``. If the equation is already negative at
    ``v_lo`` it is negative on the whole bracket (no scale solves it) and
    ``v_lo`` is returned with ``degenerate=True``. If it is still positive at
    ``v_hi`` the upper end is doubled until the sign changes.
    """
    f_lo = _finite(float(f2v(v_lo)), v_lo)
    if f_lo < 0.0:
        return v_lo, True
    hi = v_hi
    for _ in range(max_expand):
        if float(f2v(hi)) <= 0.0:
            break
        hi *= 2.0
    else:
        return hi, True
    res = find_root_monotone(f2v, v_lo, hi)
    return res.root, False


def solve_coupled_scalar(f1: Callable[[float, float], float],
                         f2: Callable[[float, float], float],
                         init: Tuple[float, float],
                         opts: SolveOptions = SolveOptions(),
                         theta_bracket: Optional[Tuple[float, float]] = None):
    """Alternate monotone solves of ``f1`` in theta and ``f2`` in v.

    ``f1`` must be non-increasing in theta for fixed v and ``f2``
    non-increasing in v for fixed theta. ``opts.v_bracket`` is required.
    ``theta_bracket`` is grown outward from the initial theta when omitted.

    Returns ``(theta, v, SolveDiagnostics)``.
    """
    if opts.v_bracket is None:
        raise InputError("solve_coupled_scalar needs opts.v_bracket")
    v_lo, v_hi = opts.v_bracket
    theta, v = float(init[0]), float(init[1])
    v = min(max(v, v_lo), v_hi)
    diag = SolveDiagnostics()
    damping = opts.damping
    prev_res = math.inf

    for k in range(1, opts.max_outer + 1):
        def g(t, _v=v):
            return f1(t, _v)

        if theta_bracket is None:
            lo, hi = _expand_bracket(g, theta, max(abs(v), 1e-12))
        else:
            lo, hi = theta_bracket
        theta_new = find_root_monotone(g, lo, hi).root if lo < hi else lo

        v_root, degenerate = solve_scale(lambda s: f2(theta_new, s), v_lo, v_hi)
        v_new = v_root if degenerate else v + damping * (v_root - v)

        r1 = abs(float(f1(theta_new, v_new)))
        r2 = abs(float(f2(theta_new, v_new)))
        diag.outer_iterations = k
        diag.residual_1, diag.residual_2 = r1, r2
        diag.degenerate_scale = degenerate
        step_theta = abs(theta_new - theta)
        step_v = abs(v_new - v)
        theta, v = theta_new, v_new

        if degenerate:
            break
        res = max(r1, r2)
        if res <= opts.tol_residual:
            diag.converged = True
            break
        if res > prev_res and damping > DAMPING_FLOOR:
            damping = max(damping / 2.0, DAMPING_FLOOR)
        prev_res = res
        if (step_theta <= opts.tol_step * (1.0 + abs(theta))
                and step_v <= opts.tol_step * v):
            break
    return theta, v, diag


def solve_score_fixed_point(score: Callable[[np.ndarray], np.ndarray],
                            gram_inverse_apply: Callable[[np.ndarray], np.ndarray],
                            scale_factor: float,
                            init: Sequence[float],
                            opts: SolveOptions = SolveOptions(),
                            max_iter: Optional[int] = None):
    """Quasi-Newton fixed point for a vector score equation ``score(theta) = 0``.

    Iterates ``theta <- theta + damping * scale_factor * G^{-1} score(theta)``
    where ``G^{-1}`` is supplied by ``gram_inverse_apply``. The damping is
    halved whenever the sup-norm of the score grows; once it would drop below
    1/64 the iteration stops and the result is flagged as not converged.

    Returns ``(theta, SolveDiagnostics)``; ``residual_1`` is the final
    ``||score||_inf``.
    """
    theta = np.array(init, dtype=float)
    s = np.asarray(score(theta), dtype=float)
    res = float(np.max(np.abs(s))) if s.size else 0.0
    if not math.isfinite(res):
        raise NumericError("non-finite score at the initial point")
    diag = SolveDiagnostics(residual_1=res, residual_2=0.0)
    damping = opts.damping
    limit = max_iter if max_iter is not None else 50 * opts.max_outer

    it = 0
    while it < limit:
        if res <= opts.tol_residual:
            diag.converged = True
            break
        step = scale_factor * np.asarray(gram_inverse_apply(s), dtype=float)
        while True:
            cand = theta + damping * step
            s_cand = np.asarray(score(cand), dtype=float)
            res_cand = float(np.max(np.abs(s_cand)))
            if math.isfinite(res_cand) and res_cand <= res:
                break
            if damping <= DAMPING_FLOOR:
                break
            damping = max(damping / 2.0, DAMPING_FLOOR)
        it += 1
        if not (math.isfinite(res_cand) and res_cand <= res):
            # no descent even at the damping floor
            break
        moved = float(np.max(np.abs(cand - theta)))
        theta, s, res = cand, s_cand, res_cand
        if moved <= opts.tol_step * (1.0 + float(np.max(np.abs(theta)))):
            diag.converged = res <= opts.tol_residual
            break
    diag.outer_iterations = it
    diag.residual_1 = res
    if res <= opts.tol_residual:
        diag.converged = True
    return theta, diag


def _grid_axis(bounds, resolution):
    lo, hi = bounds
    return np.linspace(float(lo), float(hi), resolution)


def grid_oracle(f1, f2, box, resolution: int, vectorized: bool = False):
    """Brute-force minimiser of ``max(|f1|, |f2|)`` over a regular grid.

    ``box`` is ``(theta_box, v_box)`` where ``theta_box`` is a single
    ``(lo, hi)`` pair for scalar theta or a sequence of at most two pairs for
    vector theta, and ``v_box`` is ``(v_lo, v_hi)``. For vector theta ``f1``
    returns a vector and its sup-norm is used.

    With ``vectorized=True`` the callables receive the whole theta grid at once
    (shape ``(m,)`` for scalar theta, ``(m, d)`` for vector theta) together with
    a scalar v, and must return one value (or one row) per grid point.

    Returns ``(theta, v)`` at the best grid point (first one in C order on ties).
    """
    if resolution < 16:
        raise InputError("grid_oracle needs resolution >= 16")
    theta_box, v_box = box
    scalar = np.ndim(theta_box[0]) == 0
    axes = [_grid_axis(theta_box, resolution)] if scalar else [
        _grid_axis(b, resolution) for b in theta_box]
    if len(axes) > 2:
        raise InputError("grid_oracle supports at most two theta coordinates")
    vs = _grid_axis(v_box, resolution)
    if scalar:
        thetas = axes[0]
    else:
        mesh = np.meshgrid(*axes, indexing="ij")
        thetas = np.stack([m.ravel() for m in mesh], axis=1)

    best = (math.inf, None, None)
    for v in vs:
        if vectorized:
            a = np.abs(np.asarray(f1(thetas, v), dtype=float))
            if a.ndim == 2:
                a = a.max(axis=1)
            b = np.abs(np.asarray(f2(thetas, v), dtype=float))
        else:
            a = np.array([np.max(np.abs(f1(t, v))) for t in thetas])
            b = np.array([abs(float(f2(t, v))) for t in thetas])
        obj = np.maximum(a, b)
        j = int(np.argmin(obj))
        if obj[j] < best[0]:
            best = (float(obj[j]), thetas[j], float(v))
    theta = best[1]
    theta = float(theta) if scalar else np.array(theta, dtype=float)
    return theta, best[2]


def nested_grid_oracle(f1, f2, box, resolution: int = 21, levels: int = 12,
                       shrink: float = 0.25, vectorized: bool = False):
    """Repeated :func:`grid_oracle` on boxes shrinking around the incumbent.

    Each level recentres the box on the previous best point and scales every
    side by ``shrink``. Used as a refinement oracle in low dimension.
    """
    theta_box, v_box = box
    scalar = np.ndim(theta_box[0]) == 0
    boxes = [tuple(theta_box)] if scalar else [tuple(b) for b in theta_box]
    vb = tuple(v_box)
    theta = v = None
    for _ in range(levels):
        tb = boxes[0] if scalar else boxes
        theta, v = grid_oracle(f1, f2, (tb, vb), resolution, vectorized=vectorized)
        centers = [theta] if scalar else list(theta)
        boxes = [(c - shrink * (hi - lo) / 2, c + shrink * (hi - lo) / 2)
                 for c, (lo, hi) in zip(centers, boxes)]
        half_v = shrink * (vb[1] - vb[0]) / 2
        vb = (max(v - half_v, 1e-300), v + half_v) if half_v > 0 else vb
    return theta, v
