"""Catoni-type influence functions.

Two families are provided. ``psi1`` lives between the envelopes
``-log(1 - x + x^2/2)`` and ``log(1 + x + x^2/2)``; ``psi2`` uses the
order-``beta`` envelopes ``-log(1 - x + |x|^beta/beta)`` and
``log(1 + x + |x|^beta/beta)`` with ``beta`` in (1, 2]. ``psi1`` is the
``beta = 2`` member of the same family.

Each family has three variants: the widest function inside the envelopes
(equal to the upper envelope for ``x >= 0``), the narrowest one (saturating
at ``+-log(beta)`` for ``|x| > 1``) and a convex mixture of the two.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError

__all__ = [
    "Variant",
    "WIDE",
    "NARROW",
    "mixed",
    "InfluenceSpec",
    "eval_psi1",
    "eval_psi2",
    "psi",
    "lower_envelope",
    "upper_envelope",
    "check_envelope",
]

_KINDS = ("wide", "narrow", "mixed")


@dataclass(frozen=True)
class Variant:
    """One influence-function shape: ``wide``, ``narrow`` or ``mixed``.

    ``weight`` is only meaningful for ``mixed`` and is the coefficient of the
    wide component.
    """

    kind: str
    weight: float = 0.5

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown influence variant {self.kind!r}")
        if self.kind == "mixed" and not 0.0 <= self.weight <= 1.0:
            raise ConfigError(f"mixture weight must lie in [0, 1], got {self.weight}")

    @classmethod
    def parse(cls, text: str) -> "Variant":
        """Parse ``"wide"``, ``"narrow"`` or ``"mixed:<w>"`` (``"mixed"`` means w=0.5)."""
        text = text.strip().lower()
        if text in ("wide", "narrow"):
            return cls(text)
        if text == "mixed":
            return cls("mixed", 0.5)
        if text.startswith("mixed:"):
            try:
                w = float(text.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"malformed mixture weight in {text!r}") from None
            return cls("mixed", w)
        raise ConfigError(f"unknown influence variant {text!r}")

    def __str__(self):
        if self.kind == "mixed":
            return f"mixed:{self.weight:g}"
        return self.kind


WIDE = Variant("wide")
NARROW = Variant("narrow")


def mixed(weight: float = 0.5) -> Variant:
    return Variant("mixed", weight)


@dataclass(frozen=True)
class InfluenceSpec:
    """Choice of (psi1, psi2) variants and the moment order ``beta`` of psi2."""

    psi1: Variant = field(default=WIDE)
    psi2: Variant = field(default=WIDE)
    beta: float = 2.0

    def __post_init__(self):
        if isinstance(self.psi1, str):
            object.__setattr__(self, "psi1", Variant.parse(self.psi1))
        if isinstance(self.psi2, str):
            object.__setattr__(self, "psi2", Variant.parse(self.psi2))
        _check_beta(self.beta)


def _check_beta(beta):
    if not (np.isfinite(beta) and 1.0 < beta <= 2.0):
        raise ConfigError(f"beta must lie in (1, 2], got {beta}")


def _power(a, beta):
    # a >= 0; exact square for beta == 2 keeps psi1 bit-identical across paths
    if beta == 2.0:
        return a * a
    return a**beta


def _wide(x, beta):
    a = np.abs(x)
    return np.sign(x) * np.log1p(a + _power(a, beta) / beta)


def _narrow(x, beta):
    a = np.abs(x)
    inner = np.minimum(a, 1.0)
    val = -np.log1p(-inner + _power(inner, beta) / beta)
    # |x| >= 1 lands on log(beta) through the clipped branch
    return np.sign(x) * val


def psi(variant: Variant, x, beta: float = 2.0):
    """Evaluate ``variant`` of the order-``beta`` family, without input checks."""
    if variant.kind == "wide":
        return _wide(x, beta)
    if variant.kind == "narrow":
        return _narrow(x, beta)
    w = variant.weight
    return w * _wide(x, beta) + (1.0 - w) * _narrow(x, beta)


def _as_finite(x):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InputError("influence functions are defined on finite reals only")
    return arr


def _unwrap(x, out):
    if np.ndim(x) == 0:
        return float(out)
    return out


def eval_psi1(spec: InfluenceSpec, x):
    """psi1 of ``spec`` at ``x`` (scalar or array)."""
    arr = _as_finite(x)
    return _unwrap(x, psi(spec.psi1, arr, 2.0))


def eval_psi2(spec: InfluenceSpec, x):
    """psi2 of ``spec`` at ``x`` (scalar or array), order ``spec.beta``."""
    _check_beta(spec.beta)
    arr = _as_finite(x)
    return _unwrap(x, psi(spec.psi2, arr, spec.beta))


def lower_envelope(x, beta=2.0):
    a = np.abs(x)
    return -np.log(1.0 - x + _power(a, beta) / beta)


def upper_envelope(x, beta=2.0):
    a = np.abs(x)
    return np.log(1.0 + x + _power(a, beta) / beta)


def _within(fn, grid, beta, tol):
    values = np.asarray(fn(grid), dtype=float)
    lo = lower_envelope(grid, beta)
    hi = upper_envelope(grid, beta)
    slack = tol * (1.0 + np.abs(values))
    if np.any(values < lo - slack) or np.any(values > hi + slack):
        return False
    order = np.argsort(grid, kind="stable")
    steps = np.diff(values[order])
    return bool(np.all(steps >= -slack[order][1:]))


def check_envelope(spec: InfluenceSpec, grid, *, psi1=None, psi2=None, tol=1e-12) -> bool:
    """True iff psi1 and psi2 of ``spec`` respect their envelopes and are
    non-decreasing on ``grid``.

    ``psi1``/``psi2`` optionally replace the built-in functions with arbitrary
    callables, which is how a candidate custom influence function is vetted.
    """
    grid = _as_finite(grid).ravel()
    if grid.size == 0:
        raise InputError("grid must be non-empty")
    f1 = psi1 if psi1 is not None else (lambda g: psi(spec.psi1, g, 2.0))
    f2 = psi2 if psi2 is not None else (lambda g: psi(spec.psi2, g, spec.beta))
    return _within(f1, grid, 2.0, tol) and _within(f2, grid, spec.beta, tol)
