"""Command-line interface.

Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import numpy as np

from .baselines import CvConfig, james_stein, js_expected_mpe
from .core import Dataset, DualityKind, SolverOptions
from .harness import (
    MEANS_METHODS,
    REGRESSION_METHODS,
    STUDY_B,
    STUDY_SOLVER,
    StudyKind,
    StudySpec,
    run_regression,
    run_study,
)
from .imputation import ImputationConfig, am_estimate
from .models import ManyNormalMeansModel, SimpleMeanModel, exact_simple_expectation, mnm_posterior_mean, to_eta_alpha

log = logging.getLogger("automodeling")

SIG_DIGITS = 10


class InputError(ValueError):
    """Malformed input file."""


def read_csv(path) -> Dataset:
    """Header row, then numeric rows; the last column is the response."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise InputError(f"{path}: empty file")
    width = len(rows[0])
    if width < 1:
        raise InputError(f"{path}: line 1: empty header")
    values = []
    for line, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != width:
            raise InputError(f"{path}: line {line}: expected {width} fields, got {len(row)}")
        try:
            values.append([float(c) for c in row])
        except ValueError:
            raise InputError(f"{path}: line {line}: non-numeric value") from None
    if not values:
        raise InputError(f"{path}: no data rows")
    arr = np.array(values)
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{path}: non-finite value")
    x = arr[:, :-1] if width > 1 else None
    log.info("read %d rows, %d covariate columns from %s", arr.shape[0], width - 1, path)
    return Dataset(arr[:, -1], x)


def _round(v):
    if isinstance(v, dict):
        return {str(k): _round(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_round(x) for x in v]
    if isinstance(v, np.ndarray):
        return _round(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if not np.isfinite(v) else float(f"{v:.{SIG_DIGITS}g}")
    return v


def format_json(result) -> str:
    return json.dumps(_round(result), sort_keys=True, indent=2) + "\n"


def format_study_csv(result) -> str:
    n_values = result["config"]["n"]
    lines = ["method," + ",".join(f"n={n}" for n in n_values)]
    for name, rec in result["per_method"].items():
        lines.append(name + "," + ",".join(f"{v:.{SIG_DIGITS}g}" for v in rec["mean_mpe"]))
    return "\n".join(lines) + "\n"


def format_rows_csv(result) -> str:
    rows = result["per_method"]
    keys = sorted({k for rec in rows.values() for k in rec})
    lines = ["method," + ",".join(keys)]
    for name, rec in rows.items():
        cells = []
        for k in keys:
            v = rec.get(k)
            cells.append("" if v is None else (f"{v:.{SIG_DIGITS}g}" if isinstance(v, float) else str(v)))
        lines.append(name + "," + ",".join(cells))
    return "\n".join(lines) + "\n"


def emit_result(result, fmt="json", out=None):
    """Write ``result`` as JSON or CSV to ``out`` (a path) or stdout."""
    if fmt == "csv":
        text = format_study_csv(result) if "mean_mpe" in next(iter(result["per_method"].values()), {}) \
            else format_rows_csv(result)
    else:
        text = format_json(result)
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)


def _positive_int(name, lo=1):
    def parse(s):
        try:
            v = int(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be an integer, got {s!r}") from None
        if v < lo:
            raise argparse.ArgumentTypeError(f"{name} must be at least {lo}, got {v}")
        return v
    return parse


def _positive_float(name, allow_zero=False):
    def parse(s):
        try:
            v = float(s)
        except ValueError:
            raise argparse.ArgumentTypeError(f"{name} must be a number, got {s!r}") from None
        if not np.isfinite(v) or v < 0 or (v == 0 and not allow_zero):
            raise argparse.ArgumentTypeError(f"{name} must be {'nonnegative' if allow_zero else 'positive'}")
        return v
    return parse


def _int_list(name, lo):
    item = _positive_int(name, lo)

    def parse(s):
        return tuple(item(p) for p in s.split(",") if p.strip())
    return parse


def _methods(allowed):
    def parse(s):
        names = tuple(dict.fromkeys(p.strip() for p in s.split(",") if p.strip()))
        bad = [n for n in names if n not in allowed]
        if not names or bad:
            raise argparse.ArgumentTypeError(
                f"--methods must be a comma list drawn from {','.join(allowed)}")
        return names
    return parse


def _solver_flags(p, max_iters=5000):
    p.add_argument("--tol", type=_positive_float("--tol"), default=1e-7)
    p.add_argument("--step", type=_positive_float("--step"), default=0.01,
                   help="initial (or fixed) theta step size")
    p.add_argument("--step-rule", choices=["bb", "fixed"], default="bb")
    p.add_argument("--max-iters", type=_positive_int("--max-iters"), default=max_iters)


def _am_flags(p, boot=100, max_iters=5000):
    p.add_argument("--boot", type=_positive_int("--boot"), default=boot, metavar="B")
    p.add_argument("--draws", type=_positive_int("--draws"), default=None)
    p.add_argument("--duality", choices=["l1", "l2"], default="l1")
    p.add_argument("--seed", type=_positive_int("--seed", 0), default=0)
    _solver_flags(p, max_iters)


def _output_flags(p):
    p.add_argument("--out", default=None, help="output path (stdout if omitted)")
    p.add_argument("--format", choices=["json", "csv"], default="json")


def build_parser():
    parser = argparse.ArgumentParser(prog="automodeling", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate-mnm", help="many-normal-means simulation study")
    p.add_argument("--study", choices=[k.value for k in StudyKind], default="gaussian")
    p.add_argument("--n", type=_int_list("--n", 4), default=(10, 20, 50),
                   help="sample size(s), comma separated, each at least 4")
    p.add_argument("--reps", type=_positive_int("--reps"), default=200)
    p.add_argument("--A", type=_positive_float("--A", allow_zero=True), default=0.01)
    p.add_argument("--methods", type=_methods(MEANS_METHODS), default=MEANS_METHODS)
    p.add_argument("--m-support", type=_positive_int("--m-support"), default=None)
    _am_flags(p, boot=STUDY_B, max_iters=STUDY_SOLVER.max_iters)
    _output_flags(p)

    p = sub.add_parser("fit-mnm", help="fit the discrete-prior model to a response column")
    p.add_argument("--train", required=True)
    p.add_argument("--m-support", type=_positive_int("--m-support"), default=None)
    _am_flags(p)
    _output_flags(p)

    p = sub.add_parser("fit-reg", help="fit and compare regression methods")
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--methods", type=_methods(REGRESSION_METHODS), default=REGRESSION_METHODS)
    p.add_argument("--screen-top", type=_positive_int("--screen-top"), default=None)
    p.add_argument("--folds", type=_positive_int("--folds", 2), default=10)
    _am_flags(p)
    _output_flags(p)

    p = sub.add_parser("oracle-simple", help="compare the scalar estimate with its exact expectation")
    p.add_argument("--n", type=_positive_int("--n", 2), default=25)
    p.add_argument("--ybar", type=float, default=0.1)
    _am_flags(p, boot=2000)
    _output_flags(p)

    p = sub.add_parser("baseline-js", help="James-Stein estimates or expected error")
    p.add_argument("--train", default=None, help="response file; omit for the expected-error formula")
    p.add_argument("--n", type=_int_list("--n", 4), default=(10, 20, 50))
    p.add_argument("--A", type=_positive_float("--A", allow_zero=True), default=0.01)
    _output_flags(p)
    return parser


def parse_args(argv=None):
    return build_parser().parse_args(argv)


def _imputation_config(args):
    solver = SolverOptions(theta_step=args.step, max_iters=args.max_iters, tol=args.tol,
                           step_rule=args.step_rule)
    return ImputationConfig(B=args.boot, draws_per_replicate=args.draws, seed=args.seed,
                            solver=solver, kind=DualityKind(args.duality))


def _diagnostics(sol):
    return {"iterations": sol.iterations, "converged": sol.converged,
            "residual_g": sol.residual_g, "residual_v": sol.residual_v}


def cmd_simulate(args):
    spec = StudySpec(args.study, n=args.n, K=args.reps, A=args.A, seed=args.seed)
    cfg = _imputation_config(args)
    res = run_study(spec, args.methods, cfg)
    per = {name: {"mean_mpe": res.mean[name], "se": res.se[name]} for name in res.mean}
    return {"config": {**res.config, "methods": list(args.methods), "max_iters": args.max_iters,
                       "tol": args.tol}, "per_method": per}


def cmd_fit_mnm(args):
    data = read_csv(args.train)
    m = args.m_support or data.n
    sol = am_estimate(ManyNormalMeansModel(m), Dataset(data.y), _imputation_config(args))
    eta, alpha = to_eta_alpha(sol.theta, m)
    return {"config": {"train": args.train, "m": m, "B": args.boot, "seed": args.seed,
                       "duality": args.duality},
            "per_method": {"am": {"posterior_mean": mnm_posterior_mean(sol.theta, data.y)}},
            "theta": sol.theta, "eta": eta, "alpha": alpha, "lambda": sol.lam,
            "diagnostics": _diagnostics(sol)}


def cmd_fit_reg(args):
    train, test = read_csv(args.train), read_csv(args.test)
    if train.x is None or test.x is None or train.k != test.k:
        raise InputError("train and test need the same covariate columns")
    res = run_regression(train, test, args.methods, _imputation_config(args),
                         CvConfig(folds=args.folds, seed=args.seed), args.screen_top)
    screened = res.pop("_screened")
    return {"config": {"train": args.train, "test": args.test, "methods": list(args.methods),
                       "screen_top": args.screen_top, "B": args.boot, "seed": args.seed},
            "per_method": res, "screened_columns": screened}


def symmetric_sample(n, mean, seed=0):
    """``n`` values with exact sample mean ``mean`` and unit variance (divisor n)."""
    z = np.random.default_rng(seed).standard_normal(n)
    z = z - z.mean()
    return z / np.sqrt(np.mean(z * z)) + mean


def cmd_oracle(args):
    y = symmetric_sample(args.n, args.ybar, args.seed)
    sol = am_estimate(SimpleMeanModel(), Dataset(y), _imputation_config(args))
    exact = exact_simple_expectation(args.ybar, args.n)
    mc = float(sol.theta[0])
    return {"config": {"n": args.n, "ybar": args.ybar, "B": args.boot, "seed": args.seed},
            "exact": exact, "monte_carlo": mc, "abs_diff": abs(mc - exact),
            "per_method": {}, "diagnostics": _diagnostics(sol)}


def cmd_js(args):
    if args.train:
        data = read_csv(args.train)
        return {"config": {"train": args.train},
                "per_method": {"js": {"estimate": james_stein(data.y)}}}
    return {"config": {"n": list(args.n), "A": args.A},
            "per_method": {"js": {"mean_mpe": [js_expected_mpe(args.A, n) for n in args.n]}}}


COMMANDS = {"simulate-mnm": cmd_simulate, "fit-mnm": cmd_fit_mnm, "fit-reg": cmd_fit_reg,
            "oracle-simple": cmd_oracle, "baseline-js": cmd_js}


def main(argv=None):
    args = parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        result = COMMANDS[args.command](args)
    except (OSError, ValueError, RuntimeError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        emit_result(result, args.format, args.out)
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
