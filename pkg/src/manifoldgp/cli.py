"""Command-line front end.

Subcommands::

    manifoldgp kernel      covariogram curve as CSV (distance,k,error_bound)
    manifoldgp fit         closed-form variance MLE for a dataset CSV
    manifoldgp predict     BLUP at one target site
    manifoldgp simulate    exact GP draw written as a dataset CSV
    manifoldgp equiv       equivalence verdict for two parameter sets
    manifoldgp experiment  Monte Carlo drivers writing <name>_records.csv and <name>_summary.json

Exit status is 0 on success, 1 when a computation fails (truncation did not
certify, a matrix would not factor) and 2 for usage or validation errors.
``MM_THREADS`` caps worker threads (0 picks the CPU count).
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from . import __version__
from .equivalence import equivalence_verdict, matched_sigma2
from .inference import Dataset, FactorizationError, blup, mle_sigma2
from .io import (
    atomic_write,
    dataset_to_csv,
    load_config,
    load_dataset,
    records_to_csv,
    summary_to_json,
)
from .kernel import (
    MaternParams,
    SqExpParams,
    TruncationError,
    TruncationPolicy,
    matern_kernel_distance,
)
from .montecarlo import EXPERIMENTS, ExperimentConfig, design_sites, sample_gp
from .spectrum import CIRCLE, parse_manifold

log = logging.getLogger("manifoldgp")

EXIT_OK, EXIT_COMPUTE, EXIT_USAGE = 0, 1, 2


class UsageError(ValueError):
    pass


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"must be positive and finite: {text!r}")
    return v


def _nonneg_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0: {text!r}")
    return v


def _point(text):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad coordinates: {text!r}") from None


def _add_model_flags(p, alpha=True, sigma2=True, nu=True):
    p.add_argument("--manifold", default="circle", help="circle | sphere2 | sphere:<d> | custom:<file>")
    if nu:
        p.add_argument("--nu", type=_positive_float, default=0.5)
    if alpha:
        p.add_argument("--alpha", type=_positive_float, default=1.0)
    if sigma2:
        p.add_argument("--sigma2", type=_positive_float, default=1.0)
    p.add_argument("--eps", type=_positive_float, default=1e-8, help="certified truncation tolerance")
    p.add_argument("--max-terms", type=_nonneg_int, default=10**6)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="manifoldgp", description="Gaussian processes on compact manifolds.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="count", default=0)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel", help="tabulate the Matérn covariogram")
    _add_model_flags(p)
    p.add_argument("--points", type=_nonneg_int, default=101, help="grid size")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", help="output file (default stdout)")

    p = sub.add_parser("fit", help="variance MLE at fixed nu, alpha")
    p.add_argument("dataset")
    _add_model_flags(p, sigma2=False)
    p.add_argument("--out", help="also write the JSON result here")

    p = sub.add_parser("predict", help="BLUP at a target site")
    p.add_argument("dataset")
    _add_model_flags(p)
    p.add_argument("--x0", type=_point, required=True, help="theta on the circle, or comma-separated ambient coordinates")
    p.add_argument("--plug-in", action="store_true", help="use the variance MLE instead of --sigma2")
    p.add_argument("--out")

    p = sub.add_parser("simulate", help="draw a GP sample as a dataset CSV")
    _add_model_flags(p)
    p.add_argument("--n", type=_nonneg_int, default=100)
    p.add_argument("--design", choices=("equally_spaced", "uniform_random"), default="equally_spaced")
    p.add_argument("--seed", type=_nonneg_int, default=12345)
    p.add_argument("--out", help="output file (default stdout)")

    p = sub.add_parser("equiv", help="equivalence of two Gaussian measures")
    p.add_argument("--manifold", default="circle")
    p.add_argument("--family", choices=("matern", "sqexp"), default="matern")
    p.add_argument("--nu", type=_positive_float, default=0.5)
    p.add_argument("--params1", required=True, help="alpha=<a>,sigma2=<s>")
    p.add_argument("--params2", required=True, help="alpha=<a>,sigma2=<s|match>")
    p.add_argument("--eps", type=_positive_float, default=1e-8)
    p.add_argument("--max-terms", type=_nonneg_int, default=10**6)
    p.add_argument("--out")

    p = sub.add_parser("experiment", help="run a Monte Carlo driver")
    p.add_argument("name", choices=sorted(EXPERIMENTS))
    p.add_argument("--config", help="key = value or JSON config file")
    p.add_argument("--manifold")
    p.add_argument("--nu", type=_positive_float)
    p.add_argument("--alpha", type=_positive_float, help="true decay alpha_0")
    p.add_argument("--sigma2", type=_positive_float, help="true variance sigma2_0")
    p.add_argument("--eps", type=_positive_float)
    p.add_argument("--seed", type=_nonneg_int)
    p.add_argument("--replicates", type=_nonneg_int)
    p.add_argument("--threads", type=_nonneg_int, help="worker threads (overrides MM_THREADS)")
    p.add_argument("--out", default=".", help="output directory")
    return ap


def _policy(args):
    return TruncationPolicy(args.eps, args.max_terms)


def _emit(text, out):
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def cmd_kernel(args):
    m = parse_manifold(args.manifold)
    if not m.has_addition_kernel:
        raise UsageError(f"{m.label()} has no addition kernel; pointwise kernels are unavailable")
    if args.points < 2:
        raise UsageError("--points must be >= 2")
    p = MaternParams(args.nu, args.alpha, args.sigma2)
    top = 0.5 if m.kind == CIRCLE else math.pi
    dist = np.linspace(0.0, top, args.points)
    k, bound, terms = matern_kernel_distance(m, p, _policy(args), dist)
    log.info("kernel: %d points, %d terms", len(dist), terms)
    if args.format == "json":
        text = json.dumps({"distance": dist.tolist(), "k": k.tolist(), "error_bound": bound.tolist(), "terms": terms}) + "\n"
    else:
        rows = [{"distance": d, "k": v, "error_bound": b} for d, v, b in zip(dist, k, bound)]
        text = records_to_csv(rows, ["distance", "k", "error_bound"])
    _emit(text, args.out)


def _load(args):
    m = parse_manifold(args.manifold)
    try:
        return m, load_dataset(args.dataset, m)
    except OSError as exc:
        raise UsageError(f"cannot read {args.dataset}: {exc.strerror}") from None


def cmd_fit(args):
    m, d = _load(args)
    fit = mle_sigma2(d, m, args.nu, args.alpha, _policy(args))
    out = {
        "sigma2_hat": fit.sigma2_hat,
        "log_likelihood": fit.log_likelihood,
        "condition_estimate": fit.condition_estimate,
        "jitter_used": fit.jitter_used,
        "n": len(d),
    }
    text = json.dumps(out, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if args.out:
        atomic_write(args.out, text)


def cmd_predict(args):
    m, d = _load(args)
    t = _policy(args)
    sigma2 = mle_sigma2(d, m, args.nu, args.alpha, t).sigma2_hat if args.plug_in else args.sigma2
    x0 = args.x0[0] if m.kind == CIRCLE and len(args.x0) == 1 else args.x0
    r = blup(d, m, args.nu, args.alpha, sigma2, t, x0)
    text = json.dumps({"mean": r.mean, "mse": r.mse, "sigma2": sigma2}, indent=2, sort_keys=True) + "\n"
    sys.stdout.write(text)
    if args.out:
        atomic_write(args.out, text)


def cmd_simulate(args):
    m = parse_manifold(args.manifold)
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    sites = design_sites(m, args.design, args.n, args.seed)
    z = sample_gp(m, MaternParams(args.nu, args.alpha, args.sigma2), sites, args.seed, _policy(args))
    _emit(dataset_to_csv(Dataset(m, sites, z)), args.out)


def _parse_params(text):
    vals = {}
    for item in text.split(","):
        key, sep, val = item.partition("=")
        if not sep:
            raise UsageError(f"bad parameter item {item!r}; expected key=value")
        vals[key.strip()] = val.strip()
    unknown = set(vals) - {"alpha", "sigma2"}
    if unknown or "alpha" not in vals:
        raise UsageError(f"parameters need alpha=<a>[,sigma2=<s>], got {text!r}")
    out = {"alpha": _positive_float(vals["alpha"])}
    s = vals.get("sigma2", "1")
    out["sigma2"] = s if s == "match" else _positive_float(s)
    return out


def cmd_equiv(args):
    m = parse_manifold(args.manifold)
    t = _policy(args)
    a = _parse_params(args.params1)
    b = _parse_params(args.params2)
    if a["sigma2"] == "match":
        raise UsageError("sigma2=match is only allowed in --params2")
    if b["sigma2"] == "match":
        if args.family != "matern":
            raise UsageError("sigma2=match needs the matern family")
        b["sigma2"] = matched_sigma2(m, args.nu, a["sigma2"], a["alpha"], b["alpha"], t)
    if args.family == "matern":
        p1 = MaternParams(args.nu, a["alpha"], a["sigma2"])
        p2 = MaternParams(args.nu, b["alpha"], b["sigma2"])
    else:
        p1, p2 = SqExpParams(a["alpha"], a["sigma2"]), SqExpParams(b["alpha"], b["sigma2"])
    v = equivalence_verdict(m, p1, p2, t)
    out = v.as_dict()
    out["params1"], out["params2"] = a, b
    text = json.dumps(out, indent=2, sort_keys=True, ensure_ascii=False) + "\n"
    sys.stdout.write(text)
    if args.out:
        atomic_write(args.out, text)


def _experiment_config(args) -> ExperimentConfig:
    mapping = load_config(args.config) if args.config else {}
    overrides = {
        "manifold": args.manifold,
        "nu": args.nu,
        "alpha_0": args.alpha,
        "sigma2_0": args.sigma2,
        "epsilon": args.eps,
        "seed": args.seed,
        "replicates": args.replicates,
        "threads": args.threads,
    }
    mapping.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_mapping(mapping)


def cmd_experiment(args):
    try:
        cfg = _experiment_config(args)
    except OSError as exc:
        raise UsageError(f"cannot read config: {exc}") from None
    if not os.path.isdir(args.out):
        raise UsageError(f"output directory {args.out!r} does not exist")
    report = EXPERIMENTS[args.name](cfg)
    rec = os.path.join(args.out, f"{args.name}_records.csv")
    summ = os.path.join(args.out, f"{args.name}_summary.json")
    records_text = records_to_csv(report.records)
    summary_text = summary_to_json(report.summary)
    atomic_write(rec, records_text)
    atomic_write(summ, summary_text)
    sys.stdout.write(f"wrote {rec}\nwrote {summ}\n")


COMMANDS = {
    "kernel": cmd_kernel,
    "fit": cmd_fit,
    "predict": cmd_predict,
    "simulate": cmd_simulate,
    "equiv": cmd_equiv,
    "experiment": cmd_experiment,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except (TruncationError, FactorizationError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"manifoldgp: computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except (ValueError, TypeError, IndexError, argparse.ArgumentTypeError) as exc:
        print(f"manifoldgp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"manifoldgp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
