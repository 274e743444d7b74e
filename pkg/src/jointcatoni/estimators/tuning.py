"""Robustification scales and their multipliers."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

from ..errors import ConfigError


@dataclass(frozen=True)
class TuningParams:
    """Confidence level, moment order and the CV multipliers c1, c2, c3.

    ``c1`` scales the adaptive Huber threshold, ``c2`` and ``c3`` scale the
    joint estimator's ``alpha1`` and ``alpha2``. The alphas themselves depend on
    the sample size (and dimension) and come from :meth:`alphas`.
    """

    eps: float = 0.01
    beta: float = 2.0
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ConfigError(f"eps must lie in (0, 1), got {self.eps}")
        if not 1.0 < self.beta <= 2.0:
            raise ConfigError(f"beta must lie in (1, 2], got {self.beta}")
        for name in ("c1", "c2", "c3"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")

    def alphas(self, n: int, d: Optional[int] = None) -> Tuple[float, float]:
        """``(alpha1, alpha2)`` for sample size ``n``.

        ``d=None`` gives the location model; an integer ``d`` adds the
        ``log d`` term of the regression models.
        """
        if n < 1:
            raise ConfigError("sample size must be positive")
        log_eps = math.log(1.0 / self.eps)
        expo = 1.0 / self.beta - 0.5
        log_arg = expo * math.log(n) + log_eps
        if d is not None:
            log_arg += math.log(d)
        alpha1 = self.c2 * math.sqrt(log_arg / n)
        alpha2 = self.c3 * (log_eps / n) ** (1.0 / self.beta)
        return alpha1, alpha2
