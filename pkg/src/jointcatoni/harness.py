"""Monte-Carlo experiments, cross-validated tuning and evaluation metrics.

Every replication ``r`` draws its data from a generator seeded with
``base_seed XOR r`` and its CV folds from ``[base_seed XOR r, 1]``, so a
replication's result does not depend on which worker computes it. Results are
gathered by replication index before any reduction.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import product
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .datagen import (LinearModelSpec, NoiseSpec, default_beta, gen_linear_data, make_rng,
                      replication_seed, sample_noise)
from .errors import ConfigError, InputError, JointCatoniError
from .estimators import (TuningParams, adaptive_huber, catoni_mean,
                         catoni_mean_sample_sigma, huber_tau, joint_mean_variance,
                         joint_regression, joint_ridge, ols, ridge_ls)
from .influence import NARROW, WIDE, InfluenceSpec, Variant

__all__ = [
    "MODELS",
    "MethodSpec",
    "Sweep",
    "ExperimentConfig",
    "QuantileReport",
    "SweepReport",
    "MetricsBundle",
    "LoocvResult",
    "empirical_quantile",
    "run_quantile_experiment",
    "run_parameter_sweep",
    "fold_indices",
    "cv_losses",
    "kfold_cv_select",
    "select_best",
    "loocv_errors",
    "compute_metrics",
    "sis_screen",
    "make_fitter",
    "tuning_grid",
    "select_ridge_lambda",
]

MODELS = ("mean", "regression", "ridge")
METHODS = {
    "mean": ("sample-mean", "catoni-known", "catoni-sample", "joint-catoni"),
    "regression": ("ols", "adaptive-huber", "joint-catoni"),
    "ridge": ("ridge", "adaptive-huber", "joint-catoni"),
}
DEFAULT_LEVELS = tuple(round(0.90 + 0.01 * k, 2) for k in range(11))
DEFAULT_THETA = (5.0, 0.0, -8.0, 0.0, 2.0)
DEFAULT_RIDGE_LAMBDAS = tuple(float(x) for x in np.round(np.logspace(-3, 1, 13), 12))


@dataclass(frozen=True)
class MethodSpec:
    """A method name with an optional psi1 override, written ``name`` or ``name/variant``."""

    name: str
    psi1: Optional[Variant] = None

    @classmethod
    def parse(cls, text: str) -> "MethodSpec":
        text = text.strip()
        if "/" in text:
            name, var = text.split("/", 1)
            return cls(name.strip(), Variant.parse(var))
        return cls(text)

    def __str__(self):
        return self.name if self.psi1 is None else f"{self.name}/{self.psi1}"


@dataclass(frozen=True)
class Sweep:
    param: str
    start: float
    stop: float
    step: float

    def values(self) -> List[float]:
        if self.step <= 0 or self.stop < self.start:
            raise ConfigError("sweep needs step > 0 and stop >= start")
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [round(self.start + k * self.step, 10) for k in range(count)]

    def __str__(self):
        return f"{self.param}:{self.start:g}:{self.stop:g}:{self.step:g}"


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved description of one experiment.

    ``beta=None`` means "derive from the noise tail": 2 for a finite fourth
    moment, otherwise ``(tail - 0.01) / 2``. ``psi1``/``psi2`` default to the
    wide pair for the mean model and the narrow pair for the regressions.
    """

    model: str = "mean"
    methods: Tuple[MethodSpec, ...] = ()
    reps: int = 1000
    n: int = 500
    d: int = 5
    noise: NoiseSpec = NoiseSpec("normal", (1.0,))
    theta_star: Tuple[float, ...] = ()
    mu: float = 0.0
    eps: float = 0.01
    beta: Optional[float] = None
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0
    psi1: Optional[Variant] = None
    psi2: Optional[Variant] = None
    quantile_levels: Tuple[float, ...] = DEFAULT_LEVELS
    sweep: Optional[Sweep] = None
    base_seed: int = 20240611
    cv: bool = True
    cv_grid: Tuple[float, ...] = (0.5, 1.0, 1.5)
    cv_folds: int = 3
    ridge_folds: int = 5
    ridge_lambdas: Tuple[float, ...] = DEFAULT_RIDGE_LAMBDAS
    ridge_lambda: Optional[float] = None
    lambda0: float = 0.1
    trim_alpha: float = 0.1

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        methods = tuple(m if isinstance(m, MethodSpec) else MethodSpec.parse(m)
                        for m in (self.methods or METHODS[self.model]))
        for m in methods:
            if m.name not in METHODS[self.model]:
                raise ConfigError(f"method {m.name!r} is not available for model {self.model!r}")
        object.__setattr__(self, "methods", methods)
        if self.model != "mean":
            theta = tuple(float(t) for t in self.theta_star) or tuple(
                (DEFAULT_THETA + (0.0,) * self.d)[: self.d])
            object.__setattr__(self, "theta_star", theta)
            object.__setattr__(self, "d", len(theta))
        if self.reps < 1:
            raise ConfigError("reps must be at least 1")
        if self.n < 4:
            raise ConfigError("n must be at least 4")
        levels = tuple(float(q) for q in self.quantile_levels)
        if not levels or any(not 0 < q <= 1 for q in levels) or list(levels) != sorted(levels):
            raise ConfigError("quantile_levels must be sorted and lie in (0, 1]")
        object.__setattr__(self, "quantile_levels", levels)
        TuningParams(self.eps, self.resolved_beta(), self.c1, self.c2, self.c3)
        if self.cv_folds < 2 or self.ridge_folds < 2:
            raise ConfigError("cross-validation needs at least 2 folds")
        if not 0 <= self.trim_alpha < 1:
            raise ConfigError("trim_alpha must lie in [0, 1)")
        if self.lambda0 < 0:
            raise ConfigError("lambda0 must be non-negative")

    def resolved_beta(self) -> float:
        return self.beta if self.beta is not None else default_beta(self.noise)

    def tuning(self) -> TuningParams:
        return TuningParams(self.eps, self.resolved_beta(), self.c1, self.c2, self.c3)

    def influence(self, method: Optional[MethodSpec] = None) -> InfluenceSpec:
        default = WIDE if self.model == "mean" else NARROW
        psi1 = (method.psi1 if method is not None and method.psi1 is not None
                else self.psi1 or default)
        return InfluenceSpec(psi1, self.psi2 or default, self.resolved_beta())

    def echo(self) -> Dict[str, str]:
        """Resolved settings as strings, enough to rerun the experiment."""
        out = {
            "model": self.model,
            "methods": ",".join(str(m) for m in self.methods),
            "reps": str(self.reps),
            "n": str(self.n),
            "noise": str(self.noise),
            "center": str(self.noise.center).lower(),
            "eps": repr(self.eps),
            "beta": repr(self.resolved_beta()),
            "c1": repr(self.c1), "c2": repr(self.c2), "c3": repr(self.c3),
            "psi1": str(self.influence().psi1),
            "psi2": str(self.influence().psi2),
            "quantile_levels": ",".join(repr(q) for q in self.quantile_levels),
            "base_seed": str(self.base_seed),
            "generator": "numpy.PCG64/v1",
            "trim_alpha": repr(self.trim_alpha),
        }
        if self.model == "mean":
            out["mu"] = repr(self.mu)
        else:
            out["d"] = str(self.d)
            out["theta_star"] = ",".join(repr(t) for t in self.theta_star)
            out["cv"] = str(self.cv).lower()
            out["cv_grid"] = ",".join(repr(c) for c in self.cv_grid)
            out["cv_folds"] = str(self.cv_folds)
        if self.model == "ridge":
            out["ridge_folds"] = str(self.ridge_folds)
            out["ridge_lambdas"] = ",".join(repr(v) for v in self.ridge_lambdas)
            if self.ridge_lambda is not None:
                out["ridge_lambda"] = repr(self.ridge_lambda)
            out["lambda0"] = repr(self.lambda0)
        if self.sweep is not None:
            out["sweep"] = str(self.sweep)
        return out


# ---------------------------------------------------------------------------
# reports

@dataclass
class QuantileReport:
    methods: List[str]
    levels: List[float]
    errors: np.ndarray  # (reps, methods)
    failures: Dict[str, int]
    metadata: Dict[str, str] = field(default_factory=dict)

    def quantile(self, method: str, level: float) -> float:
        return empirical_quantile(self.errors[:, self.methods.index(method)], level)

    def mean_error(self, method: str) -> float:
        return float(np.mean(self.errors[:, self.methods.index(method)]))

    def rows(self):
        return [(m, q, self.quantile(m, q)) for m in self.methods for q in self.levels]

    columns = ("method", "level", "error")


@dataclass
class SweepReport:
    methods: List[str]
    values: List[float]
    q99: np.ndarray  # (values, methods)
    metadata: Dict[str, str] = field(default_factory=dict)

    def rows(self):
        return [(m, v, float(self.q99[i, j]))
                for j, m in enumerate(self.methods) for i, v in enumerate(self.values)]

    def series(self, method: str) -> np.ndarray:
        return self.q99[:, self.methods.index(method)]

    columns = ("method", "param", "q99")


@dataclass(frozen=True)
class MetricsBundle:
    mae: float
    medae: float
    trimmed_mae: float
    trim_alpha: float


@dataclass
class LoocvResult:
    errors: np.ndarray  # nan marks a failed fit
    failures: int


def empirical_quantile(errors, level: float) -> float:
    """Upper order statistic: the ``ceil(level * m)``-th smallest of ``m`` values."""
    x = np.sort(np.asarray(errors, dtype=float))
    m = x.size
    if m == 0:
        raise InputError("no errors to summarise")
    k = min(max(math.ceil(level * m - 1e-9), 1), m)
    return float(x[k - 1])


# ---------------------------------------------------------------------------
# cross-validation

def fold_indices(n: int, folds: int, seed) -> List[np.ndarray]:
    """Seeded random partition of ``range(n)`` into ``folds`` near-equal parts."""
    if folds < 2 or n < folds:
        raise InputError(f"need folds >= 2 and n >= folds, got n={n}, folds={folds}")
    perm = make_rng(seed).permutation(n)
    return [np.sort(p) for p in np.array_split(perm, folds)]


def cv_losses(X, y, candidates, folds: int, fit: Callable, seed) -> np.ndarray:
    """Mean held-out absolute prediction error for each candidate.

    ``fit(X_train, y_train, candidate)`` returns a coefficient vector. A
    candidate whose fit raises or returns non-finite coefficients on any fold
    gets ``nan``.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    parts = fold_indices(X.shape[0], folds, seed)
    losses = np.empty(len(candidates))
    for i, cand in enumerate(candidates):
        total, count = 0.0, 0
        for test in parts:
            train = np.ones(X.shape[0], dtype=bool)
            train[test] = False
            try:
                coef = np.asarray(fit(X[train], y[train], cand), dtype=float)
            except (JointCatoniError, ArithmeticError, np.linalg.LinAlgError):
                total = math.nan
                break
            if not np.all(np.isfinite(coef)):
                total = math.nan
                break
            total += float(np.sum(np.abs(y[test] - X[test] @ coef)))
            count += test.size
        losses[i] = total / count if count else math.nan
    return losses


def select_best(candidates, losses, rtol: float = 1e-12) -> Tuple[float, ...]:
    """Lexicographically smallest candidate among those within ``rtol`` of the best loss."""
    ok = [i for i in range(len(candidates)) if np.isfinite(losses[i])]
    if not ok:
        raise InputError("every cross-validation candidate failed")
    best = min(losses[i] for i in ok)
    ties = [i for i in ok if losses[i] <= best + rtol * abs(best)]
    return min((tuple(candidates[i]) for i in ties))


def kfold_cv_select(X, y, candidates: Sequence[Tuple[float, ...]], folds: int,
                    fit: Callable, seed) -> Tuple[float, ...]:
    """Candidate tuple with the smallest k-fold held-out absolute error.

    Losses within a relative 1e-12 of the minimum count as ties, which go to
    the lexicographically smallest tuple.
    """
    candidates = [tuple(c) for c in candidates]
    if not candidates:
        raise InputError("no candidates to select from")
    if len(candidates) == 1:
        return candidates[0]
    return select_best(candidates, cv_losses(X, y, candidates, folds, fit, seed))


# ---------------------------------------------------------------------------
# per-method fitting

def _joint_ok(fit) -> bool:
    return fit.diagnostics.converged or fit.diagnostics.degenerate_scale


def tuning_grid(method: MethodSpec, cfg: ExperimentConfig,
                ridge_lambda: Optional[float] = None):
    """Candidate tuples and ``fit(X, y, candidate) -> coef`` for a tunable method.

    Tuples are ``(c1,)`` or ``(c1, c_AH)`` for adaptive Huber and
    ``(c2, c3)`` or ``(c2, c3, c_JC)`` for the joint estimator; the ridge
    variants scale ``ridge_lambda`` by the last entry.
    """
    g = cfg.cv_grid
    tp, spec = cfg.tuning(), cfg.influence(method)
    ridge = cfg.model == "ridge"
    if method.name == "adaptive-huber":
        if ridge:
            return (list(product(g, g)),
                    lambda X, y, c: adaptive_huber(X, y, huber_tau(y, c[0]), lam=c[1] * ridge_lambda))
        return [(c,) for c in g], lambda X, y, c: adaptive_huber(X, y, huber_tau(y, c[0]))
    if method.name == "joint-catoni":
        if ridge:
            return (list(product(g, g, g)),
                    lambda X, y, c: joint_ridge(X, y, replace(tp, c2=c[0], c3=c[1]), spec,
                                                lambda0=c[2] * ridge_lambda))
        return (list(product(g, g)),
                lambda X, y, c: joint_regression(X, y, replace(tp, c2=c[0], c3=c[1]), spec))
    raise ConfigError(f"method {method.name!r} has no tuning grid")


def _coef(result):
    return getattr(result, "coef", result)


def make_fitter(method: MethodSpec, cfg: ExperimentConfig, seed,
                ridge_lambda: Optional[float] = None) -> Callable:
    """``fit(X, y) -> (coef, ok)`` for a regression or ridge method.

    With ``cfg.cv`` the multipliers (and ridge rescaling factors) are chosen by
    ``cfg.cv_folds``-fold CV on the data passed to ``fit``; otherwise the
    config's ``c1``/``c2``/``c3`` are used, with ``lambda0`` as the joint
    ridge penalty. For the ridge model ``ridge_lambda`` is the baseline
    penalty; when omitted it comes from :func:`select_ridge_lambda`.
    """
    if method.name not in METHODS[cfg.model]:
        raise ConfigError(f"method {method.name!r} is not available for model {cfg.model!r}")
    if method.name == "ols":
        return lambda X, y: (ols(X, y), True)

    def fit(X, y):
        lam = None
        if cfg.model == "ridge":
            lam = ridge_lambda if ridge_lambda is not None else select_ridge_lambda(X, y, cfg, seed)
            if method.name == "ridge":
                return ridge_ls(X, y, lam), True
        cands, one = tuning_grid(method, cfg, lam)
        if cfg.cv:
            best = kfold_cv_select(X, y, cands, cfg.cv_folds,
                                   lambda a, b, c: _coef(one(a, b, c)), seed)
        elif method.name == "adaptive-huber":
            best = (cfg.c1, 1.0)[: len(cands[0])]
        else:
            best = (cfg.c2, cfg.c3, cfg.lambda0 / lam if lam else 0.0)[: len(cands[0])]
        res = one(X, y, best)
        return _coef(res), (_joint_ok(res) if hasattr(res, "diagnostics") else True)
    return fit


def select_ridge_lambda(X, y, cfg: ExperimentConfig, seed) -> float:
    if cfg.ridge_lambda is not None:
        return cfg.ridge_lambda
    cands = [(lam,) for lam in cfg.ridge_lambdas]
    (lam,) = kfold_cv_select(X, y, cands, cfg.ridge_folds,
                             lambda a, b, c: ridge_ls(a, b, c[0]), seed)
    return lam


def _mean_estimate(method: MethodSpec, x, cfg: ExperimentConfig):
    variant = method.psi1 or cfg.psi1 or WIDE
    if method.name == "sample-mean":
        return float(np.mean(x)), True
    if method.name == "catoni-known":
        return catoni_mean(x, cfg.eps, cfg.noise.std(), variant), True
    if method.name == "catoni-sample":
        return catoni_mean_sample_sigma(x, cfg.eps, variant), True
    fit = joint_mean_variance(x, cfg.tuning(), cfg.influence(method))
    return fit.theta_hat, _joint_ok(fit)


def _replicate(cfg: ExperimentConfig, rep: int):
    """Errors and success flags of every method on replication ``rep``."""
    seed = replication_seed(cfg.base_seed, rep)
    rng = make_rng(seed)
    cv_seed = [seed, 1]
    errors, ok = [], []
    if cfg.model == "mean":
        x = cfg.mu + sample_noise(cfg.noise, cfg.n, rng=rng)
        target = cfg.mu + cfg.noise.mean()
        for m in cfg.methods:
            try:
                est, good = _mean_estimate(m, x, cfg)
                errors.append(abs(est - target))
                ok.append(good)
            except (JointCatoniError, ArithmeticError):
                errors.append(math.inf)
                ok.append(False)
        return errors, ok

    theta = np.asarray(cfg.theta_star)
    X, y = gen_linear_data(LinearModelSpec(cfg.theta_star, cfg.n, cfg.noise), rng=rng)
    lam = None
    if cfg.model == "ridge":
        lam = select_ridge_lambda(X, y, cfg, cv_seed)
    for m in cfg.methods:
        try:
            coef, good = make_fitter(m, cfg, cv_seed, ridge_lambda=lam)(X, y)
            errors.append(float(np.linalg.norm(coef - theta)))
            ok.append(good)
        except (JointCatoniError, ArithmeticError, np.linalg.LinAlgError):
            errors.append(math.inf)
            ok.append(False)
    return errors, ok


def _replicate_chunk(args):
    cfg, reps = args
    return [_replicate(cfg, r) for r in reps]


def _run_reps(cfg: ExperimentConfig, workers: int):
    reps = list(range(cfg.reps))
    if workers <= 1:
        return [_replicate(cfg, r) for r in reps]
    chunk = max(1, math.ceil(len(reps) / (4 * workers)))
    chunks = [reps[i:i + chunk] for i in range(0, len(reps), chunk)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        out = []
        for part in pool.map(_replicate_chunk, [(cfg, c) for c in chunks]):
            out.extend(part)
    return out


def run_quantile_experiment(cfg: ExperimentConfig, workers: int = 1) -> QuantileReport:
    """Error quantiles of every method over ``cfg.reps`` seeded replications.

    Failed or non-converged fits keep their (possibly infinite) error and are
    counted in ``failures``; nothing is dropped.
    """
    results = _run_reps(cfg, workers)
    names = [str(m) for m in cfg.methods]
    errors = np.array([r[0] for r in results], dtype=float)
    flags = np.array([r[1] for r in results], dtype=bool)
    failures = {m: int(np.sum(~flags[:, j])) for j, m in enumerate(names)}
    meta = dict(cfg.echo())
    for j, m in enumerate(names):
        meta[f"failures[{m}]"] = str(failures[m])
        meta[f"mean_error[{m}]"] = repr(float(np.mean(errors[:, j])))
    return QuantileReport(names, list(cfg.quantile_levels), errors, failures, meta)


def run_parameter_sweep(cfg: ExperimentConfig, workers: int = 1) -> SweepReport:
    """99% error quantile of every method along ``cfg.sweep``.

    Each sweep point reuses the same replication seeds. When ``beta`` is not
    fixed in the config it is re-derived from each swept noise law.
    """
    if cfg.sweep is None:
        raise ConfigError("run_parameter_sweep needs a sweep setting")
    values = cfg.sweep.values()
    names = [str(m) for m in cfg.methods]
    q99 = np.empty((len(values), len(names)))
    meta = dict(cfg.echo())
    for i, val in enumerate(values):
        point = replace(cfg, noise=cfg.noise.with_param(cfg.sweep.param, val),
                        quantile_levels=(0.99,), sweep=None)
        rep = run_quantile_experiment(point, workers)
        for j, m in enumerate(names):
            q99[i, j] = rep.quantile(m, 0.99)
            meta[f"failures[{m}@{val!r}]"] = str(rep.failures[m])
    return SweepReport(names, values, q99, meta)


# ---------------------------------------------------------------------------
# evaluation

def loocv_errors(X, y, fit: Callable) -> LoocvResult:
    """Leave-one-out absolute prediction errors ``|y_i - <x_i, theta_(-i)>|``.

    ``fit(X_train, y_train)`` returns coefficients, or ``(coef, ok)``. Failed
    fits leave ``nan`` at their position and are counted.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n = X.shape[0]
    if n < 3:
        raise InputError("LOOCV needs at least 3 observations")
    out = np.full(n, math.nan)
    failures = 0
    mask = np.ones(n, dtype=bool)
    for i in range(n):
        mask[i] = False
        try:
            coef = fit(X[mask], y[mask])
            if isinstance(coef, tuple):
                coef = coef[0]
            coef = np.asarray(coef, dtype=float)
            if not np.all(np.isfinite(coef)):
                raise ArithmeticError("non-finite coefficients")
            out[i] = abs(y[i] - float(X[i] @ coef))
        except (JointCatoniError, ArithmeticError, np.linalg.LinAlgError):
            failures += 1
        mask[i] = True
    return LoocvResult(out, failures)


def compute_metrics(errors, trim_alpha: float = 0.1) -> MetricsBundle:
    """MAE, median absolute error and trimmed MAE.

    The trimmed mean drops ``floor(trim_alpha / 2 * n)`` errors from each end.
    """
    e = np.sort(np.abs(np.asarray(errors, dtype=float)))
    if e.size == 0:
        raise InputError("no errors to summarise")
    if not np.all(np.isfinite(e)):
        raise InputError("errors must be finite")
    if not 0 <= trim_alpha < 1:
        raise InputError("trim_alpha must lie in [0, 1)")
    k = int(math.floor(trim_alpha / 2 * e.size))
    kept = e[k:e.size - k] if k else e
    return MetricsBundle(float(np.mean(e)), float(np.median(e)), float(np.mean(kept)),
                         float(trim_alpha))


def sis_screen(X, y, keep: int) -> List[int]:
    """Indices of the ``keep`` columns with the largest marginal ``|corr(x_j, y)|``.

    Ties go to the lower index; constant columns rank last.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    d = X.shape[1]
    if not 1 <= keep <= d:
        raise InputError(f"keep must lie in [1, {d}], got {keep}")
    sx = X.std(axis=0)
    sy = y.std()
    const = sx == 0
    Z = (X - X.mean(axis=0)) / np.where(const, 1.0, sx)
    yc = (y - y.mean()) / (sy if sy > 0 else 1.0)
    corr = np.abs(Z.T @ yc) / X.shape[0]
    key = np.where(const, np.inf, -corr)
    order = np.argsort(key, kind="stable")
    return [int(j) for j in order[:keep]]
