"""Command-line interface: ``logconcave fit | eval | sample | cluster``.

Input data are comma-separated numeric files with an optional header row;
fits are stored as JSON artifacts. Floats are written with 17 significant
digits so artifacts round-trip doubles exactly.

Exit codes: 0 success, 2 usage or input error, 3 non-convergence,
4 degenerate mixture.
"""
import argparse
import csv
import io
import json
import logging
import math
import sys

import numpy as np

from .core import WeightedSample, prepare_sample
from .distribution import cdf, hazard, make_rng, pdf, sample
from .errors import DegenerateMixture, LogConcaveError
from .mixture import EmConfig, classify, copula_em_fit, em_fit, gaussian_em_fit, posterior
from .solver import LogConcaveFit, SolverConfig, SolverReport, fit_mle

ARTIFACT_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NOT_CONVERGED = 3
EXIT_DEGENERATE = 4


class UsageError(Exception):
    """Bad input file or flag combination (exit code 2)."""


# ---------------------------------------------------------------- formatting

def format_number(v) -> str:
    """17 significant digits; integers stay integers."""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if not math.isfinite(v):
        return "null"
    return format(v, ".17g")


def to_json(obj, indent=0) -> str:
    """Deterministic JSON with fixed float formatting."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {to_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(to_json(v) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + to_json(v, indent + 1) for v in seq) + "\n" + end + "]"
    return format_number(obj)


def _write(text, path):
    if path is None or path == "-":
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _csv_text(rows):
    buf = io.StringIO()
    for row in rows:
        buf.write(",".join(format_number(v) for v in row) + "\n")
    return buf.getvalue()


# ---------------------------------------------------------------- input

def _parse_float(cell):
    try:
        return float(cell)
    except ValueError:
        return None


def read_table(path) -> np.ndarray:
    """Numeric CSV as an ``(n, d)`` array; a non-numeric first row is a header."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    if rows and any(_parse_float(c) is None for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise UsageError(f"{path}: no data rows")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise UsageError(f"{path}: row {i + 1} has {len(row)} columns, expected {width}")
        for j, cell in enumerate(row):
            v = _parse_float(cell)
            if v is None or not math.isfinite(v):
                raise UsageError(f"{path}: non-numeric value {cell!r} in row {i + 1}")
            out[i, j] = v
    return out


def fit_to_dict(fit: LogConcaveFit) -> dict:
    r = fit.report
    return {
        "version": ARTIFACT_VERSION,
        "knots": fit.knots,
        "weights": fit.sample.weights,
        "log_density": fit.log_density,
        "cdf_at_knots": fit.cdf_at_knots,
        "report": {
            "iterations": r.iterations,
            "objective_trace": r.objective_trace,
            "stationarity_residual": r.stationarity_residual,
            "converged": bool(r.converged),
        },
    }


def fit_from_dict(doc) -> LogConcaveFit:
    """Rebuild a fit from an artifact dictionary."""
    try:
        version = doc["version"]
        if version != ARTIFACT_VERSION:
            raise UsageError(f"unsupported artifact version {version}")
        knots = np.asarray(doc["knots"], dtype=float)
        weights = np.asarray(doc.get("weights", np.ones(knots.size)), dtype=float)
        phi = np.asarray(doc["log_density"], dtype=float)
        F = np.asarray(doc["cdf_at_knots"], dtype=float)
        rep = doc["report"]
        report = SolverReport(int(rep["iterations"]),
                              [math.nan if v is None else float(v) for v in rep["objective_trace"]],
                              math.inf if rep["stationarity_residual"] is None
                              else float(rep["stationarity_residual"]),
                              bool(rep["converged"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"malformed artifact: {exc}") from None
    if knots.ndim != 1 or knots.size < 2 or not (phi.shape == F.shape == knots.shape == weights.shape):
        raise UsageError("malformed artifact: inconsistent array lengths")
    if not np.all(np.diff(knots) > 0):
        raise UsageError("malformed artifact: knots must increase")
    return LogConcaveFit(knots, phi, F, WeightedSample(knots, weights), report)


def load_fit(path) -> LogConcaveFit:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not JSON: {exc}") from None
    return fit_from_dict(doc)


# ---------------------------------------------------------------- commands

def _solver_config(args) -> SolverConfig:
    return SolverConfig(max_iter=args.max_iter, tol_stationarity=args.tol_stationarity,
                        tol_objective=args.tol_objective)


def cmd_fit(args) -> int:
    data = read_table(args.input)
    if data.shape[1] != 1:
        raise UsageError("fit expects a single-column file")
    fit = fit_mle(prepare_sample(data[:, 0]), _solver_config(args))
    _write(to_json(fit_to_dict(fit)) + "\n", args.output)
    return EXIT_OK if fit.report.converged else EXIT_NOT_CONVERGED


def eval_grid(fit: LogConcaveFit, g: int, what: str):
    """``g`` equally spaced points over the support and the requested values."""
    lo, hi = fit.knots[0], fit.knots[-1]
    if what == "hazard":
        # same spacing, right endpoint excluded
        x = lo + (hi - lo) * np.arange(g) / g
        return x, hazard(fit, x)
    x = np.linspace(lo, hi, g)
    return x, (pdf if what == "pdf" else cdf)(fit, x)


def cmd_eval(args) -> int:
    if args.grid < 2:
        raise UsageError("--grid must be at least 2")
    fit = load_fit(args.artifact)
    x, y = eval_grid(fit, args.grid, args.what)
    if args.format == "json":
        text = to_json({"x": x, args.what: y}) + "\n"
    else:
        text = _csv_text(zip(x, y))
    _write(text, args.output)
    return EXIT_OK


def cmd_sample(args) -> int:
    if args.m < 0:
        raise UsageError("--m must be nonnegative")
    fit = load_fit(args.artifact)
    draws = sample(fit, make_rng(args.seed), args.m)
    if args.format == "json":
        text = to_json({"seed": args.seed, "values": draws}) + "\n"
    else:
        text = _csv_text((v,) for v in draws)
    _write(text, args.output)
    return EXIT_OK


def cmd_cluster(args) -> int:
    if args.k < 1:
        raise UsageError("--k must be at least 1")
    data = read_table(args.input)
    config = EmConfig(max_em_iter=args.max_em_iter, tol_loglik=args.tol_loglik,
                      restarts=args.restarts, seed=args.seed,
                      min_component_weight=args.min_component_weight,
                      solver=_solver_config(args))
    if args.mode == "copula":
        if data.shape[1] < 2:
            raise UsageError("--mode copula needs at least two columns")
        model = copula_em_fit(data, args.k, config)
        x = data
    else:
        if args.mode == "univariate" and data.shape[1] != 1:
            raise UsageError("--mode univariate needs a single-column file")
        if args.mode == "univariate":
            x = data[:, 0]
            model = em_fit(x, args.k, config)
        else:
            x = data[:, 0] if data.shape[1] == 1 else data
            model = gaussian_em_fit(x, args.k, config)
    post = np.atleast_2d(posterior(model, x))
    labels = classify(model, x) + 1
    doc = {
        "version": ARTIFACT_VERSION,
        "mode": args.mode,
        "k": args.k,
        "seed": args.seed,
        "pi": model.pi,
        "loglik": model.loglik,
        "iterations": model.iterations,
        "converged": bool(model.converged),
        "labels": labels,
        "posteriors": post,
    }
    if args.format == "csv":
        header = "label," + ",".join(f"p{m + 1}" for m in range(model.k)) + "\n"
        text = header + _csv_text([lab, *row] for lab, row in zip(labels, post))
    else:
        text = to_json(doc) + "\n"
    _write(text, args.output)
    return EXIT_OK if model.converged else EXIT_NOT_CONVERGED


# ---------------------------------------------------------------- parser

def _seed(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _add_solver_flags(p):
    d = SolverConfig()
    p.add_argument("--max-iter", type=int, default=d.max_iter)
    p.add_argument("--tol-stationarity", type=float, default=d.tol_stationarity)
    p.add_argument("--tol-objective", type=float, default=d.tol_objective)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="logconcave",
                                     description="Log-concave density estimation and clustering.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit the log-concave MLE to a one-column CSV")
    p.add_argument("input")
    p.add_argument("-o", "--output", default=None, help="artifact path (default stdout)")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="evaluate a fit on an equally spaced grid")
    p.add_argument("artifact")
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--what", choices=("pdf", "cdf", "hazard"), default="pdf")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sample", help="draw exact samples from a fit")
    p.add_argument("artifact")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("-o", "--output", default=None)
    p.set_defaults(func=cmd_sample)

    e = EmConfig()
    p = sub.add_parser("cluster", help="mixture clustering by EM")
    p.add_argument("input")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--mode", choices=("univariate", "copula", "gaussian"), default="univariate")
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--restarts", type=int, default=e.restarts)
    p.add_argument("--max-em-iter", type=int, default=e.max_em_iter)
    p.add_argument("--tol-loglik", type=float, default=e.tol_loglik)
    p.add_argument("--min-component-weight", type=float, default=None,
                   help="restart when a mixing weight falls below this (default 2/n)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("-o", "--output", default=None)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_cluster)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, stream=sys.stderr,
                        format="logconcave: %(levelname)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DegenerateMixture as exc:
        print(f"logconcave: degenerate mixture: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (UsageError, LogConcaveError, ValueError) as exc:
        print(f"logconcave: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
