# app/cli.py
"""
Command-line front end.

    fit          fit one Gaussian mixture per farm group from a wind CSV
    popf         run a probabilistic OPF from a TOML config
    reference    compute and store SRS reference statistics
    compare      error-index table over sampling methods and sizes
    discrepancy  star discrepancy of a uniform stream

Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.
"""
import argparse
import dataclasses
import logging
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd

from app.config import load_config
from app.errors import InfeasibleBudgetError, PopfError, UsageError
from app.models.mixture import EmOptions
from app.models.sampling import StreamKind
from app.services.comparison import compare_methods, compute_reference
from app.services.discrepancy import MAX_GRID_DIM, star_discrepancy_1d, star_discrepancy_grid
from app.services.mixture_model import fit_em, select_components
from app.services.popf_engine import run_popf
from app.services.uniform_streams import make_stream
from app.services.wind_power import normalize_columns
from storage.artifacts import (
    load_reference, model_from_fit, save_dump, save_model, save_reference, save_report, write_csv,
)
from storage.paths import resolve
from storage.wind_csv import parse_group_spec, read_wind_csv

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class _Parser(argparse.ArgumentParser):
    """argparse that reports bad flags as UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from None


def _kind_list(text: str) -> List[StreamKind]:
    try:
        return [StreamKind(v.strip()) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"methods must be among {', '.join(k.value for k in StreamKind)}, got '{text}'") from None


def setup_logging(verbose: bool = False, quiet: bool = False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


# ----------------------------------------------------------
# fit
# ----------------------------------------------------------

def cmd_fit(args) -> int:
    df = read_wind_csv(args.csv)
    groups = parse_group_spec(args.groups, list(df.columns))
    normalized, bounds = normalize_columns(df, allow_constant=args.reg_eps > 0)
    opts = EmOptions(max_iter=args.max_iter, rel_tol=args.rel_tol, reg_eps=args.reg_eps,
                     init=args.init, restarts=args.restarts, seed=args.seed)
    out_dir = resolve(args.out_dir)

    for name, columns in groups.items():
        data = normalized[columns].to_numpy(dtype=float)
        m = args.m
        if args.bic:
            m, table = select_components(data, range(1, args.bic + 1), opts)
            print(table.to_string(index=False))
            print(f"[{name}] BIC selects M={m}")
        fit = fit_em(data, m, opts)
        path = save_model(out_dir / f"{name}.json", model_from_fit(name, columns, fit, bounds))
        print(f"[{name}] M={m} D={len(columns)} log-likelihood={fit.log_likelihood:.6f} "
              f"iterations={fit.iterations} converged={fit.converged} -> {path}")
    return 0


# ----------------------------------------------------------
# popf
# ----------------------------------------------------------

def _config_overrides(args) -> dict:
    return {
        "n_samples": getattr(args, "n", None),
        "seed": getattr(args, "seed", None),
        "solver": getattr(args, "solver", None),
        "workers": getattr(args, "workers", None),
    }


def _write_outputs(cfg, report, args):
    report_path = resolve(args.report) if args.report else cfg.report_path
    dump_path = resolve(args.dump_csv) if args.dump_csv else cfg.dump_csv
    if report_path:
        save_report(report_path, report, include_timings=cfg.include_timings)
        print(f"report written to {report_path}")
    if dump_path and report.per_sample is not None:
        save_dump(dump_path, report.per_sample)
        print(f"per-sample dump written to {dump_path}")


def cmd_popf(args) -> int:
    cfg = load_config(args.config, _config_overrides(args))
    try:
        report = run_popf(cfg)
    except InfeasibleBudgetError as e:
        if e.report is not None:
            _write_outputs(cfg, e.report, args)
        raise
    _write_outputs(cfg, report, args)
    if "cost" in report.stats:
        s = report.stats["cost"]
        print(f"cost mean={s.mean:.6f} std={s.std:.6f} over {s.count} of {report.n_samples} samples")
    return 0


# ----------------------------------------------------------
# reference / compare
# ----------------------------------------------------------

def cmd_reference(args) -> int:
    cfg = load_config(args.config, _config_overrides(args))
    reference = compute_reference(cfg)
    out = resolve(args.out) if args.out else Path(args.config).resolve().with_suffix(".reference.json")
    save_reference(out, reference)
    print(f"reference ({reference.method}, N={reference.n}, seed={reference.seed}) written to {out}")
    return 0


def cmd_compare(args) -> int:
    cfg = load_config(args.config, {"workers": args.workers})
    reference = None
    if args.reference:
        reference = load_reference(resolve(args.reference))
    elif args.make_reference:
        n_ref = args.reference_n or max(args.sizes)
        reference = compute_reference(cfg, n=n_ref)
        if args.reference_out:
            save_reference(resolve(args.reference_out), reference)
    if args.track:
        cfg = dataclasses.replace(cfg, track=args.track.split(","))
    table = compare_methods(cfg, args.methods, args.sizes, args.seeds, reference)
    if args.out:
        write_csv(resolve(args.out), table)
        print(f"comparison table ({len(table)} rows) written to {resolve(args.out)}")
    else:
        table.to_csv(sys.stdout, index=False)
    return 0


# ----------------------------------------------------------
# discrepancy
# ----------------------------------------------------------

def cmd_discrepancy(args) -> int:
    if args.n < 1:
        raise UsageError(f"--n must be at least 1, got {args.n}")
    if args.dim < 1 or args.dim > MAX_GRID_DIM:
        raise UsageError(f"unsupported dimension {args.dim}; discrepancy supports 1 to {MAX_GRID_DIM}")
    stream = make_stream(args.kind, args.dim, seed=args.seed, skip=args.skip, block_size=args.n,
                         randomize=not args.raw)
    points = stream.next_block(args.n)
    if args.dump:
        cols = [f"u{j + 1}" for j in range(args.dim)]
        write_csv(resolve(args.dump), pd.DataFrame(points, columns=cols))
    if args.dim == 1:
        print(f"kind={args.kind} n={args.n} dim=1 D*={star_discrepancy_1d(points):.10g}")
    else:
        bracket = star_discrepancy_grid(points, resolution=args.resolution)
        print(f"kind={args.kind} n={args.n} dim={args.dim} "
              f"D* in [{bracket.lower:.10g}, {bracket.upper:.10g}]")
    return 0


# ----------------------------------------------------------
# Parser and entry point
# ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="popf", description="Probabilistic optimal power flow with QMC-MCMC wind sampling.")
    noise = parser.add_mutually_exclusive_group()
    noise.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    noise.add_argument("--quiet", "-q", action="store_true", help="warnings and errors only")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    fit = sub.add_parser("fit", help="fit farm-group mixtures from a wind CSV")
    fit.add_argument("csv", type=Path)
    fit.add_argument("--m", type=int, default=5, help="mixture components (default 5)")
    fit.add_argument("--groups", help="NAME=COL,COL;NAME=COL (default: one group of all columns)")
    fit.add_argument("--out-dir", default=".", help="directory for <group>.json model files")
    fit.add_argument("--max-iter", type=int, default=500)
    fit.add_argument("--rel-tol", type=float, default=1e-7)
    fit.add_argument("--reg-eps", type=float, default=1e-6)
    fit.add_argument("--init", choices=["kmeans_pp", "random_restart"], default="kmeans_pp")
    fit.add_argument("--restarts", type=int, default=1)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--bic", type=int, metavar="M_MAX", default=0,
                     help="choose M in 1..M_MAX by BIC instead of --m")
    fit.set_defaults(func=cmd_fit)

    popf = sub.add_parser("popf", help="run a probabilistic OPF")
    popf.add_argument("config", type=Path)
    popf.add_argument("--n", type=int, help="override [run] n_samples")
    popf.add_argument("--seed", type=int)
    popf.add_argument("--solver", choices=["ac", "dc"])
    popf.add_argument("--workers", type=int)
    popf.add_argument("--report", help="report JSON path (overrides [run] report)")
    popf.add_argument("--dump-csv", help="per-sample CSV path (overrides [run] dump_csv)")
    popf.set_defaults(func=cmd_popf)

    ref = sub.add_parser("reference", help="compute SRS reference statistics")
    ref.add_argument("config", type=Path)
    ref.add_argument("--n", type=int, help="reference sample size (default [run] n_samples)")
    ref.add_argument("--seed", type=int)
    ref.add_argument("--solver", choices=["ac", "dc"])
    ref.add_argument("--workers", type=int)
    ref.add_argument("--out", help="reference JSON path")
    ref.set_defaults(func=cmd_reference)

    cmp_ = sub.add_parser("compare", help="compare sampling methods against a reference")
    cmp_.add_argument("config", type=Path)
    cmp_.add_argument("--methods", type=_kind_list, default=[StreamKind.SRS, StreamKind.LHS, StreamKind.SOBOL])
    cmp_.add_argument("--sizes", type=_int_list, required=True)
    cmp_.add_argument("--seeds", type=_int_list)
    cmp_.add_argument("--reference", help="stored reference JSON (default: [run] reference)")
    cmp_.add_argument("--make-reference", action="store_true", help="compute an SRS reference first")
    cmp_.add_argument("--reference-n", type=int, help="reference size (default: largest --sizes)")
    cmp_.add_argument("--reference-out", help="also store the computed reference here")
    cmp_.add_argument("--track", help="comma-separated output variables, e.g. cost,bus_v:12")
    cmp_.add_argument("--workers", type=int)
    cmp_.add_argument("--out", help="CSV path (default: stdout)")
    cmp_.set_defaults(func=cmd_compare)

    disc = sub.add_parser("discrepancy", help="star discrepancy of a uniform stream")
    disc.add_argument("--kind", choices=[k.value for k in StreamKind], default="sobol")
    disc.add_argument("--n", type=int, required=True)
    disc.add_argument("--dim", type=int, default=1)
    disc.add_argument("--seed", type=int, default=0)
    disc.add_argument("--skip", type=int, default=0)
    disc.add_argument("--raw", action="store_true", help="unscrambled Sobol sequence (ignores --seed)")
    disc.add_argument("--resolution", type=int, default=256)
    disc.add_argument("--dump", help="write the points to this CSV")
    disc.set_defaults(func=cmd_discrepancy)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code
    setup_logging(args.verbose, args.quiet)
    try:
        return args.func(args)
    except PopfError as e:
        logger.error("%s", e)
        return e.exit_code
