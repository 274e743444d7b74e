"""Seeded heavy-tailed noise and synthetic linear-model data."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import gamma as gamma_fn, gammaln

from .errors import ConfigError, InputError

__all__ = [
    "GENERATOR",
    "NoiseSpec",
    "LinearModelSpec",
    "make_rng",
    "replication_seed",
    "sample_noise",
    "gen_linear_data",
    "kurtosis",
    "default_beta",
]

# Changing the bit generator changes every digest downstream.
GENERATOR = "numpy.PCG64/v1"

# family -> ordered parameter names
_FAMILIES = {
    "normal": ("sigma",),
    "t": ("df",),
    "pareto": ("scale", "shape"),
    "frechet": ("location", "scale", "shape"),
    "dpareto": ("scale", "shape"),
    "halft": ("df",),
}
_ASYMMETRIC = {"pareto", "frechet", "halft"}


def make_rng(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def replication_seed(base_seed: int, rep: int) -> int:
    """Seed of replication ``rep``: ``base_seed XOR rep``."""
    return int(base_seed) ^ int(rep)


@dataclass(frozen=True)
class NoiseSpec:
    """Noise family with parameters, e.g. ``NoiseSpec("pareto", (1.0, 2.1))``.

    ``center`` subtracts the analytic mean of the asymmetric families so the
    draws have expectation zero; symmetric families are unaffected.
    """

    family: str
    params: Tuple[float, ...]
    center: bool = True

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ConfigError(f"unknown noise family {self.family!r}")
        names = _FAMILIES[self.family]
        params = tuple(float(p) for p in self.params)
        if len(params) != len(names):
            raise ConfigError(
                f"{self.family} noise takes {len(names)} parameter(s) {names}, got {len(params)}")
        object.__setattr__(self, "params", params)
        p = self.param_dict()
        if "sigma" in p and p["sigma"] < 0:
            raise ConfigError("normal sigma must be non-negative")
        if "df" in p and p["df"] <= 0:
            raise ConfigError("degrees of freedom must be positive")
        if "scale" in p and p["scale"] <= 0:
            raise ConfigError("scale must be positive")
        if "shape" in p and p["shape"] <= 0:
            raise ConfigError("shape must be positive")
        if self.center and self.family in _ASYMMETRIC:
            tail = p.get("shape", p.get("df"))
            if tail <= 1:
                raise ConfigError(
                    f"cannot centre {self.family} noise with tail index {tail} <= 1 (infinite mean)")

    @classmethod
    def parse(cls, text: str, center: bool = True) -> "NoiseSpec":
        """Parse ``"normal:1.0"``, ``"t:2.1"``, ``"pareto:1:2.1"``,
        ``"frechet:0:1:2.1"``, ``"dpareto:1:2.1"`` or ``"halft:2.1"``."""
        parts = [s.strip() for s in text.strip().split(":")]
        family = parts[0].lower()
        try:
            params = tuple(float(s) for s in parts[1:])
        except ValueError:
            raise ConfigError(f"malformed noise spec {text!r}") from None
        return cls(family, params, center)

    def __str__(self):
        return ":".join([self.family] + [format(p, "g") for p in self.params])

    def param_dict(self):
        return dict(zip(_FAMILIES[self.family], self.params))

    def with_param(self, name: str, value: float) -> "NoiseSpec":
        names = _FAMILIES[self.family]
        if name not in names:
            raise ConfigError(f"{self.family} noise has no parameter {name!r}")
        params = list(self.params)
        params[names.index(name)] = float(value)
        return replace(self, params=tuple(params))

    @property
    def tail_index(self) -> float:
        """Highest finite moment order (``inf`` for the normal)."""
        p = self.param_dict()
        if self.family == "normal":
            return math.inf
        return p.get("shape", p.get("df"))

    def raw_mean(self) -> float:
        """Mean of the uncentred distribution."""
        p = self.param_dict()
        f = self.family
        if f in ("normal", "t", "dpareto"):
            return 0.0
        if f == "pareto":
            a = p["shape"]
            return math.inf if a <= 1 else a * p["scale"] / (a - 1)
        if f == "frechet":
            a = p["shape"]
            return math.inf if a <= 1 else p["location"] + p["scale"] * gamma_fn(1 - 1 / a)
        nu = p["df"]  # halft
        if nu <= 1:
            return math.inf
        return 2 * math.sqrt(nu / math.pi) / (nu - 1) * math.exp(
            gammaln((nu + 1) / 2) - gammaln(nu / 2))

    def mean(self) -> float:
        """Mean of the draws produced by :func:`sample_noise`."""
        return 0.0 if self.center else self.raw_mean()

    def std(self) -> float:
        """Standard deviation (``inf`` when the variance does not exist)."""
        p = self.param_dict()
        f = self.family
        if f == "normal":
            return p["sigma"]
        if f in ("t", "halft"):
            nu = p["df"]
            if nu <= 2:
                return math.inf
            second = nu / (nu - 2)
            if f == "t":
                return math.sqrt(second)
            return math.sqrt(second - self.raw_mean() ** 2)
        a = p["shape"]
        if a <= 2:
            return math.inf
        s = p["scale"]
        if f == "pareto":
            return s * math.sqrt(a / ((a - 1) ** 2 * (a - 2)))
        if f == "frechet":
            return s * math.sqrt(gamma_fn(1 - 2 / a) - gamma_fn(1 - 1 / a) ** 2)
        # dpareto: random sign times a Lomax deviation scale * (U^(-1/a) - 1)
        return s * math.sqrt(2.0 / ((a - 1) * (a - 2)))


@dataclass(frozen=True)
class LinearModelSpec:
    theta_star: Tuple[float, ...]
    n: int
    noise: NoiseSpec
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "theta_star", tuple(float(t) for t in self.theta_star))
        if len(self.theta_star) < 1:
            raise ConfigError("theta_star must have at least one coordinate")
        if self.n < 1:
            raise ConfigError("n must be positive")

    @property
    def d(self) -> int:
        return len(self.theta_star)


def _draw(spec: NoiseSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    p = spec.param_dict()
    f = spec.family
    if f == "normal":
        return p["sigma"] * rng.standard_normal(n)
    if f in ("t", "halft"):
        nu = p["df"]
        z = rng.standard_normal(n)
        chi2 = 2.0 * rng.standard_gamma(nu / 2.0, n)
        t = z / np.sqrt(chi2 / nu)
        return np.abs(t) if f == "halft" else t
    a = p["shape"]
    u = 1.0 - rng.random(n)  # (0, 1]
    if f == "pareto":
        return p["scale"] * u ** (-1.0 / a)
    if f == "frechet":
        return p["location"] + p["scale"] * (-np.log(u)) ** (-1.0 / a)
    # dpareto
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return sign * p["scale"] * (u ** (-1.0 / a) - 1.0)


def sample_noise(spec: NoiseSpec, n: int, seed=None, rng: Optional[np.random.Generator] = None):
    """``n`` i.i.d. draws from ``spec`` (centred when ``spec.center``).

    Either ``seed`` or an existing generator ``rng`` must be given.
    """
    if rng is None:
        if seed is None:
            raise InputError("sample_noise needs a seed or a generator")
        rng = make_rng(seed)
    x = _draw(spec, int(n), rng)
    if spec.center and spec.family in _ASYMMETRIC:
        x = x - spec.raw_mean()
    return x


def gen_linear_data(spec: LinearModelSpec, rng: Optional[np.random.Generator] = None):
    """Gaussian design ``X ~ N(0, I_d)`` and ``y = X theta* + noise``."""
    if rng is None:
        rng = make_rng(spec.seed)
    theta = np.asarray(spec.theta_star, dtype=float)
    X = rng.standard_normal((spec.n, spec.d))
    eps = sample_noise(spec.noise, spec.n, rng=rng)
    return X, X @ theta + eps


def kurtosis(data: Sequence[float]) -> float:
    """Non-excess kurtosis ``m4 / m2**2`` with 1/n central moments."""
    x = np.asarray(data, dtype=float)
    if x.size < 4:
        raise InputError("kurtosis needs at least 4 observations")
    c = x - x.mean()
    m2 = np.mean(c * c)
    if m2 == 0.0:
        raise InputError("kurtosis undefined for zero-variance data")
    return float(np.mean(c**4) / m2**2)


def default_beta(noise: NoiseSpec) -> float:
    """Moment order used when the config leaves ``beta`` unset.

    2 for noise with a finite fourth moment, otherwise ``(tail - 0.01) / 2``.
    """
    tail = noise.tail_index
    if tail > 4.01:
        return 2.0
    beta = (tail - 0.01) / 2.0
    if beta <= 1.0:
        raise ConfigError(
            f"{noise} has too heavy a tail for any beta in (1, 2]; set beta explicitly")
    return beta
