"""Command-line entry point: config files, CSV input/output and subcommands.

Exit codes: 0 on success, 2 for configuration or file-format errors, 3 for
numeric, design or input failures.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .datagen import NoiseSpec
from .errors import ConfigError, FormatError, JointCatoniError
from .estimators import catoni_mean, catoni_mean_sample_sigma, joint_mean_variance
from .harness import (ExperimentConfig, MethodSpec, Sweep, _coef, compute_metrics,
                      cv_losses, loocv_errors, make_fitter, run_parameter_sweep,
                      run_quantile_experiment, select_best, select_ridge_lambda, sis_screen,
                      tuning_grid)
from .influence import Variant

__all__ = ["parse_config", "parse_config_text", "read_csv", "CsvTable", "Table",
           "write_report", "main"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


# ---------------------------------------------------------------------------
# config files

def _floats(text: str) -> Tuple[float, ...]:
    return tuple(float(t) for t in text.split(",") if t.strip())


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _sweep(text: str) -> Sweep:
    parts = text.split(":")
    if len(parts) != 4:
        raise ValueError("sweep must look like param:start:stop:step")
    return Sweep(parts[0].strip(), float(parts[1]), float(parts[2]), float(parts[3]))


def _optional_float(text: str) -> Optional[float]:
    return None if text.strip().lower() in ("auto", "none", "") else float(text)


_PARSERS = {
    "model": str.strip,
    "methods": lambda s: tuple(MethodSpec.parse(m) for m in s.split(",") if m.strip()),
    "reps": int,
    "n": int,
    "d": int,
    "noise": str.strip,
    "center": _bool,
    "theta_star": _floats,
    "mu": float,
    "eps": float,
    "beta": _optional_float,
    "c1": float,
    "c2": float,
    "c3": float,
    "psi1": Variant.parse,
    "psi2": Variant.parse,
    "quantile_levels": _floats,
    "sweep": _sweep,
    "base_seed": int,
    "seed": int,
    "cv": _bool,
    "cv_grid": _floats,
    "cv_folds": int,
    "ridge_folds": int,
    "ridge_lambdas": _floats,
    "ridge_lambda": _optional_float,
    "lambda0": float,
    "trim_alpha": float,
}


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse ``key=value`` lines into a validated :class:`ExperimentConfig`.

    Blank lines and ``#`` comments are ignored. ``seed`` is an alias of
    ``base_seed``. Errors carry the offending line number.
    """
    values: Dict[str, object] = {}
    lines: Dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected key=value, got {line!r}", line=lineno)
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r}", line=lineno)
        try:
            parsed = _PARSERS[key](val)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}", line=lineno) from None
        key = "base_seed" if key == "seed" else key
        values[key] = parsed
        lines[key] = lineno

    center = values.pop("center", True)
    if "noise" in values:
        try:
            values["noise"] = NoiseSpec.parse(values["noise"], center=center)
        except (ValueError, ConfigError) as exc:
            raise ConfigError(f"bad value for noise: {exc}", line=lines["noise"]) from None
    elif not center:
        values["noise"] = replace(ExperimentConfig().noise, center=False)
    try:
        return ExperimentConfig(**values)
    except (ValueError, ConfigError) as exc:
        # blame the latest line whose key the message mentions
        msg = str(exc)
        hits = [lines[k] for k in lines if k in msg or k.rstrip("s") in msg]
        raise ConfigError(msg, line=max(hits) if hits else None) from None


def parse_config(path: str) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


# ---------------------------------------------------------------------------
# CSV input

@dataclass
class CsvTable:
    data: np.ndarray
    header: Optional[List[str]]
    dropped: int

    def column_index(self, key) -> int:
        if isinstance(key, int) or (isinstance(key, str) and key.lstrip("-").isdigit()):
            idx = int(key)
            if not -self.data.shape[1] <= idx < self.data.shape[1]:
                raise FormatError(f"column index {idx} out of range")
            return idx % self.data.shape[1]
        if self.header is None or key not in self.header:
            raise FormatError(f"no column named {key!r}")
        return self.header.index(key)

    def split(self, response) -> Tuple[np.ndarray, np.ndarray, List[str]]:
        """Predictor matrix, response vector and predictor names."""
        j = self.column_index(response)
        names = self.header or [str(k) for k in range(self.data.shape[1])]
        keep = [k for k in range(self.data.shape[1]) if k != j]
        return self.data[:, keep], self.data[:, j], [names[k] for k in keep]


def _cell(text: str) -> float:
    val = float(text)
    if not math.isfinite(val):
        raise ValueError(text)
    return val


def read_csv(path: str, has_header: bool = True) -> CsvTable:
    """Load a rectangular numeric table.

    Rows with a missing or non-numeric cell are dropped and counted. Ragged
    rows or a file without data rows raise :class:`FormatError`.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    header = None
    if has_header:
        if not rows:
            raise FormatError(f"{path}: empty file")
        header = [h.strip() for h in rows.pop(0)]
    if not rows:
        raise FormatError(f"{path}: no data rows")
    width = len(header) if header is not None else len(rows[0])
    good, dropped = [], 0
    for k, row in enumerate(rows, start=2 if has_header else 1):
        if len(row) != width:
            raise FormatError(f"{path}: row {k} has {len(row)} cells, expected {width}")
        try:
            good.append([_cell(c) for c in row])
        except ValueError:
            dropped += 1
    if not good:
        raise FormatError(f"{path}: every row has missing or non-numeric cells")
    return CsvTable(np.array(good, dtype=float), header, dropped)


# ---------------------------------------------------------------------------
# CSV output

@dataclass
class Table:
    """Generic report: fixed columns, rows and a metadata block."""

    columns: Sequence[str]
    rows: List[tuple]
    metadata: Dict[str, str]


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_report(report, path: str) -> None:
    """Write ``#key=value`` metadata, a header row and data rows.

    Reals use 17 significant digits so a read-back is bit-exact; lines end in LF.
    """
    rows = report.rows() if callable(report.rows) else report.rows
    with open(path, "w", newline="", encoding="utf-8") as fh:
        for key, val in report.metadata.items():
            fh.write(f"#{key}={val}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(report.columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


# ---------------------------------------------------------------------------
# subcommands

def _load_config(args) -> ExperimentConfig:
    cfg = parse_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, base_seed=args.seed)
    return cfg


def _design(args):
    table = read_csv(args.data, has_header=not args.no_header)
    X, y, names = table.split(args.response)
    if args.standardize:
        sd = X.std(axis=0)
        X = (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    if args.intercept:
        X = np.column_stack([np.ones(X.shape[0]), X])
        names = ["intercept"] + names
    meta = {"data": args.data, "response": str(args.response), "rows": str(X.shape[0]),
            "dropped_rows": str(table.dropped), "intercept": str(args.intercept).lower(),
            "standardize": str(args.standardize).lower()}
    return X, y, names, meta


def _cmd_estimate_mean(args) -> int:
    cfg = _load_config(args)
    table = read_csv(args.data, has_header=not args.no_header)
    x = table.data[:, table.column_index(args.column)]
    method = MethodSpec.parse(args.method)
    variant = method.psi1 or cfg.psi1
    meta = dict(cfg.echo())
    meta.update({"data": args.data, "column": str(args.column), "rows": str(x.size),
                 "dropped_rows": str(table.dropped), "method": str(method)})
    rows = []
    if method.name == "joint-catoni":
        fit = joint_mean_variance(x, cfg.tuning(), cfg.influence(method))
        rows = [("theta", fit.theta_hat), ("v", fit.v_hat),
                ("alpha1", fit.alpha1), ("alpha2", fit.alpha2)]
        meta["converged"] = str(fit.diagnostics.converged).lower()
        meta["outer_iterations"] = str(fit.diagnostics.outer_iterations)
    elif method.name == "catoni-sample":
        rows = [("theta", catoni_mean_sample_sigma(x, cfg.eps, *([variant] if variant else [])))]
    elif method.name == "catoni-known":
        if args.sigma is None:
            raise ConfigError("catoni-known needs --sigma")
        rows = [("theta", catoni_mean(x, cfg.eps, args.sigma, *([variant] if variant else [])))]
    elif method.name == "sample-mean":
        rows = [("theta", float(np.mean(x)))]
    else:
        raise ConfigError(f"unknown mean method {method.name!r}")
    write_report(Table(("quantity", "value"), rows, meta), args.out)
    return EXIT_OK


def _cmd_fit(args, model: str) -> int:
    method = MethodSpec.parse(args.method)
    cfg = replace(_load_config(args), model=model, methods=(method,))
    X, y, names, meta = _design(args)
    coef, ok = make_fitter(method, cfg, [cfg.base_seed, 1])(X, y)
    meta = {**cfg.echo(), **meta, "method": str(method), "converged": str(ok).lower()}
    write_report(Table(("term", "coef"), list(zip(names, coef)), meta), args.out)
    return EXIT_OK


def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    report = run_quantile_experiment(cfg, workers=args.workers)
    write_report(report, args.out)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    cfg = _load_config(args)
    if cfg.sweep is None:
        raise ConfigError("sweep subcommand needs a sweep=param:start:stop:step key")
    write_report(run_parameter_sweep(cfg, workers=args.workers), args.out)
    return EXIT_OK


def _cmd_cv(args) -> int:
    method = MethodSpec.parse(args.method)
    cfg = replace(_load_config(args), model=args.model, methods=(method,))
    X, y, names, meta = _design(args)
    seed = [cfg.base_seed, 1]
    lam = select_ridge_lambda(X, y, cfg, seed) if cfg.model == "ridge" else None
    cands, one = tuning_grid(method, cfg, lam)
    losses = cv_losses(X, y, cands, cfg.cv_folds, lambda a, b, c: _coef(one(a, b, c)), seed)
    best = select_best(cands, losses)
    meta = {**cfg.echo(), **meta, "method": str(method),
            "selected": ";".join(repr(c) for c in best)}
    if lam is not None:
        meta["ridge_lambda_selected"] = repr(lam)
    rows = [(";".join(repr(c) for c in cand), loss) for cand, loss in zip(cands, losses)]
    write_report(Table(("candidate", "cv_mae"), rows, meta), args.out)
    return EXIT_OK


def _cmd_loocv(args) -> int:
    methods = [MethodSpec.parse(m) for m in args.methods.split(",")]
    cfg = replace(_load_config(args), model=args.model, methods=tuple(methods))
    X, y, names, meta = _design(args)
    rows, per_point = [], []
    meta = {**cfg.echo(), **meta}
    for m in methods:
        res = loocv_errors(X, y, make_fitter(m, cfg, [cfg.base_seed, 1]))
        finite = res.errors[np.isfinite(res.errors)]
        mb = compute_metrics(finite, cfg.trim_alpha)
        rows.append((str(m), mb.mae, mb.medae, mb.trimmed_mae))
        meta[f"failures[{m}]"] = str(res.failures)
        per_point.append(res.errors)
    write_report(Table(("method", "mae", "medae", "trimmed_mae"), rows, meta), args.out)
    if args.errors_out:
        err_rows = [(str(m), i, float(e)) for m, errs in zip(methods, per_point)
                    for i, e in enumerate(errs) if np.isfinite(e)]
        write_report(Table(("method", "index", "error"), err_rows, meta), args.errors_out)
    return EXIT_OK


def _cmd_screen(args) -> int:
    table = read_csv(args.data, has_header=not args.no_header)
    X, y, names = table.split(args.response)
    keep = sis_screen(X, y, args.keep)
    meta = {"data": args.data, "response": str(args.response), "rows": str(X.shape[0]),
            "dropped_rows": str(table.dropped), "keep": str(args.keep)}
    rows = [(rank, j, names[j]) for rank, j in enumerate(keep, start=1)]
    write_report(Table(("rank", "index", "name"), rows, meta), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jointcatoni",
        description="Joint robust estimation of trend and scale under heavy-tailed noise.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, data=True, config=True):
        if config:
            p.add_argument("--config", help="key=value config file")
            p.add_argument("--seed", type=int, help="override base_seed")
        if data:
            p.add_argument("--data", required=True, help="input CSV")
            p.add_argument("--no-header", action="store_true", help="CSV has no header row")
        p.add_argument("--out", required=True, help="output CSV")

    def design(p):
        p.add_argument("--response", required=True, help="response column name or index")
        p.add_argument("--intercept", action="store_true", help="prepend a column of ones")
        p.add_argument("--standardize", action="store_true",
                       help="centre and scale predictors before fitting")

    p = sub.add_parser("estimate-mean", help="robust location (and scale) of one column")
    common(p)
    p.add_argument("--column", default="0", help="column name or index")
    p.add_argument("--method", default="joint-catoni",
                   help="joint-catoni | catoni-sample | catoni-known | sample-mean [/psi1]")
    p.add_argument("--sigma", type=float, help="known standard deviation for catoni-known")
    p.set_defaults(func=_cmd_estimate_mean)

    for name, model, default in (("regress", "regression", "joint-catoni"),
                                 ("ridge", "ridge", "joint-catoni")):
        p = sub.add_parser(name, help=f"fit a {model} method on a CSV")
        common(p)
        design(p)
        p.add_argument("--method", default=default)
        p.set_defaults(func=lambda a, m=model: _cmd_fit(a, m))

    for name, func, text in (("simulate", _cmd_simulate, "error-quantile experiment"),
                             ("sweep", _cmd_sweep, "99%% quantile versus a noise parameter")):
        p = sub.add_parser(name, help=text)
        common(p, data=False)
        p.add_argument("--workers", type=int, default=1, help="worker processes")
        p.set_defaults(func=func)

    p = sub.add_parser("cv", help="cross-validation table for a method's tuning grid")
    common(p)
    design(p)
    p.add_argument("--method", default="joint-catoni")
    p.add_argument("--model", choices=("regression", "ridge"), default="regression")
    p.set_defaults(func=_cmd_cv)

    p = sub.add_parser("loocv", help="leave-one-out error metrics")
    common(p)
    design(p)
    p.add_argument("--methods", default="ols,adaptive-huber,joint-catoni")
    p.add_argument("--model", choices=("regression", "ridge"), default="regression")
    p.add_argument("--errors-out", help="also write per-observation errors here")
    p.set_defaults(func=_cmd_loocv)

    p = sub.add_parser("screen", help="rank predictors by marginal correlation")
    common(p, config=False)
    p.add_argument("--response", required=True)
    p.add_argument("--keep", type=int, required=True)
    p.set_defaults(func=_cmd_screen)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (JointCatoniError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
