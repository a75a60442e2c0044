"""Command-line interface.

Subcommands wrap the library with deterministic, file-based inputs and
outputs. Every run writes a ``manifest.json`` (command, resolved config,
base seed, library version, outputs, duration) into the output directory.

Exit codes: 0 success, 2 config error, 3 input error, 4 numeric failure
(non-studentizable data or a non-positive-definite kernel).
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from fixedb import __version__
from fixedb.exceptions import (
    DomainError,
    KernelNotPositiveDefiniteError,
    MissingTableRowError,
    NonStudentizableError,
)
from fixedb.chains import SamplerConfig
from fixedb.ci import ci_classical, ci_fixedb
from fixedb.experiments import (
    ModelSpec,
    coverage_study,
    rate_study,
    toy_multilimit_study,
    write_manifest,
)
from fixedb.kernels import by_name
from fixedb.lagwindow import cn_from_rule, gamma_n_sq
from fixedb.limitdist import FixedBQuantileTable, cdf_table, quantile_table
from fixedb.mercer import nystrom_decompose, positive_definiteness_report
from fixedb.seeding import derive_seed

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INPUT = 3
EXIT_NUMERIC = 4

OUTDIR_ENV = "FIXEDB_OUTDIR"

DEFAULT_TABLE_DRAWS = 10**6
DEFAULT_TABLE_LEVELS = (0.05, 0.025, 0.005)
DEFAULT_TABLE_SEED = 20120801


def _outdir(args) -> Path:
    path = Path(args.outdir or os.environ.get(OUTDIR_ENV, "."))
    path.mkdir(parents=True, exist_ok=True)
    return path


def _write(path: Path, text: str) -> Path:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)
    return path


def _parse_levels(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise DomainError(f"bad levels list {text!r}") from None


def _load_series(path: str) -> np.ndarray:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise IOError(f"cannot read {path}: {exc}") from exc
    if not lines:
        raise ValueError(f"{path} is empty")
    start = 0
    try:
        float(lines[0])
    except ValueError:
        start = 1  # header row
    try:
        values = np.array([float(v) for v in lines[start:]])
    except ValueError as exc:
        raise ValueError(f"{path} is not single-column numeric: {exc}") from exc
    if len(values) < 10:
        raise ValueError("need at least 10 observations")
    return values


def _table_path(outdir: Path, kernel_id: str) -> Path:
    return outdir / f"quantiles_{kernel_id}.csv"


def _table_json_path(outdir: Path, kernel_id: str) -> Path:
    return outdir / f"quantiles_{kernel_id}.json"


def _load_or_build_table(kernel_id: str, tables_dir: Path,
                         seed: int = DEFAULT_TABLE_SEED) -> FixedBQuantileTable:
    """Persisted-table contract: reuse the JSON table if present, else
    simulate once with fixed defaults and persist it."""
    json_path = _table_json_path(tables_dir, kernel_id)
    if json_path.exists():
        return FixedBQuantileTable.from_json(json_path.read_text("utf-8"))
    table = quantile_table(by_name(kernel_id), DEFAULT_TABLE_LEVELS,
                           DEFAULT_TABLE_DRAWS, derive_seed(seed, kernel_id))
    tables_dir.mkdir(parents=True, exist_ok=True)
    _write(_table_path(tables_dir, kernel_id), table.to_csv())
    _write(json_path, table.to_json())
    return table


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_quantiles(args) -> int:
    outdir = _outdir(args)
    start = time.perf_counter()
    kernel = by_name(args.kernel)
    levels = _parse_levels(args.levels)
    table = quantile_table(kernel, levels, args.draws, args.seed,
                           method=args.method,
                           m=args.m)
    out = Path(args.out) if args.out else _table_path(outdir, kernel.id)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write(out, table.to_csv())
    json_out = out.with_suffix(".json")
    _write(json_out, table.to_json())
    write_manifest(out.parent / "manifest.json", "quantiles",
                   {"kernel": kernel.id, "levels": levels,
                    "draws": args.draws, "method": args.method, "m": args.m},
                   args.seed, [out, json_out], time.perf_counter() - start)
    for row in table.rows:
        print(f"tail={row.level:g} critical_value={row.critical_value:.6f} "
              f"mc_se={row.mc_se:.2e}")
    return EXIT_OK


def cmd_cdf(args) -> int:
    outdir = _outdir(args)
    start = time.perf_counter()
    lo, hi, count = (float(v) for v in args.grid.split(":"))
    grid = np.linspace(lo, hi, int(count))
    kernels = [by_name(k) for k in args.kernel.split(",") if k]
    lines = ["kernel,x,cdf"]
    for kernel in kernels:
        tab = cdf_table(kernel, grid, args.draws,
                        derive_seed(args.seed, kernel.id))
        for x, f in zip(tab.xs, tab.cdf):
            lines.append(f"{kernel.id},{float(x)!r},{float(f)!r}")
    out = Path(args.out) if args.out else outdir / "cdf.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    _write(out, "\n".join(lines) + "\n")
    write_manifest(out.parent / "manifest.json", "cdf",
                   {"kernels": [k.id for k in kernels], "grid": args.grid,
                    "draws": args.draws},
                   args.seed, [out], time.perf_counter() - start)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_eigs(args) -> int:
    outdir = _outdir(args)
    start = time.perf_counter()
    kernel = by_name(args.kernel)
    report = positive_definiteness_report(kernel, args.m)
    decomp = nystrom_decompose(kernel, args.m, args.trace_fraction)
    out = outdir / f"eigs_{kernel.id}.json"
    _write(out, decomp.to_json())
    write_manifest(outdir / "manifest.json", "eigs",
                   {"kernel": kernel.id, "m": args.m,
                    "trace_fraction": args.trace_fraction},
                   0, [out], time.perf_counter() - start)
    print(f"min_eigenvalue={report.min_eigenvalue:.3e} "
          f"positive_definite={report.passed}")
    print(f"retained {decomp.n_retained} eigenvalues, "
          f"trace fraction {decomp.kept_trace_fraction:.6f}")
    for i, val in enumerate(decomp.eigenvalues[:10]):
        print(f"alpha_{i + 1} = {val:.8f}")
    if decomp.n_retained > 10:
        print(f"... ({decomp.n_retained - 10} more)")
    return EXIT_OK


def cmd_estimate(args) -> int:
    x = _load_series(args.input)
    n = len(x)
    kernel = by_name(args.kernel)
    c_n = cn_from_rule(n, args.cn)
    est = gamma_n_sq(x, c_n, kernel)
    print(f"n={n} c_n={c_n} kernel={kernel.id}")
    print(f"mean={x.mean()!r}")
    print(f"gamma_sq={est.gamma_sq!r}")
    print(f"ess={est.ess!r}")
    print(f"mc_error={est.mc_error!r}")
    if c_n >= n:
        tables_dir = Path(args.table).parent if args.table else _outdir(args)
        if args.table:
            table = FixedBQuantileTable.from_json(
                Path(args.table).read_text("utf-8"))
        else:
            table = _load_or_build_table(kernel.id, tables_dir)
        interval = ci_fixedb(x, kernel, args.level, table)
    else:
        interval = ci_classical(x, c_n, kernel, args.level)
    print(f"ci_method={interval.method} level={interval.level:g} "
          f"critical_value={interval.critical_value!r}")
    print(f"halfwidth={interval.halfwidth!r}")
    print(f"interval=[{interval.lower!r}, {interval.upper!r}]")
    return EXIT_OK


def cmd_coverage(args) -> int:
    outdir = _outdir(args)
    start = time.perf_counter()
    spec = ModelSpec.parse(args.model)
    kernels = [by_name(k) for k in args.kernels.split(",") if k]
    deltas = _parse_levels(args.deltas)
    tables_dir = Path(args.tables_dir) if args.tables_dir else outdir
    tables = {k.id: _load_or_build_table(k.id, tables_dir) for k in kernels}
    report = coverage_study(spec, deltas, kernels, args.K, args.n,
                            args.burnin, args.seed, level=args.level,
                            tables=tables, workers=args.workers)
    out = outdir / "coverage.csv"
    _write(out, report.to_csv())
    write_manifest(outdir / "manifest.json", "coverage",
                   {"model": args.model, "deltas": deltas,
                    "kernels": [k.id for k in kernels], "K": args.K,
                    "n": args.n, "burnin": args.burnin, "level": args.level,
                    "truth": report.truth,
                    "cells": [r.cell_label for r in report.rows]},
                   args.seed, [out], time.perf_counter() - start)
    print(f"truth={report.truth!r}")
    for r in report.rows:
        delta = "n" if r.delta is None else f"{r.delta:g}"
        print(f"{r.method:9s} {r.kernel_id:9s} delta={delta:4s} "
              f"coverage={r.coverage:.3f} halfwidth={r.mean_halfwidth:.4g} "
              f"miss_flags={r.miss_flags}")
    return EXIT_OK


def cmd_rate(args) -> int:
    outdir = _outdir(args)
    start = time.perf_counter()
    n_grid = [int(v) for v in args.ngrid.split(",") if v]
    rules = [v for v in args.rules.split(",") if v]
    report = rate_study(args.rho, n_grid, rules, args.R, args.seed,
                        kernel_id=args.kernel, workers=args.workers)
    out = outdir / "rate.csv"
    _write(out, report.to_csv())
    write_manifest(outdir / "manifest.json", "rate",
                   {"rho": args.rho, "ngrid": n_grid, "rules": rules,
                    "R": args.R, "kernel": args.kernel},
                   args.seed, [out], time.perf_counter() - start)
    for rule, slope in report.slopes:
        print(f"rule={rule} fitted_slope={slope:.3f}")
    return EXIT_OK


def cmd_toy(args) -> int:
    outdir = _outdir(args)
    start = time.perf_counter()
    config = SamplerConfig(n_total=args.n, burn_in=args.burnin,
                           target_rate=args.target_rate, bounds=(1.6, 40.0),
                           initial_param=2.0, c_gamma=0.5, kappa=0.75)
    report = toy_multilimit_study(args.seeds, config, args.seed,
                                  keep_traces=True, strict=args.strict)
    out = outdir / "toy_report.csv"
    traces = outdir / "toy_traces.csv"
    _write(out, report.to_csv())
    _write(traces, report.traces_to_csv())
    write_manifest(outdir / "manifest.json", "toy",
                   {"seeds": args.seeds, "n": args.n, "burnin": args.burnin,
                    "target_rate": args.target_rate,
                    "roots": list(report.roots)},
                   args.seed, [out, traces], time.perf_counter() - start)
    print(f"acceptance-rate roots at level {args.target_rate:g}: "
          + ", ".join(f"{r:.4f}" for r in report.roots))
    clusters = report.clusters()
    for root in sorted(clusters):
        vals = clusters[root]
        print(f"root {root:.4f}: {len(vals)} runs, "
              f"mean gamma_sq={vals.mean():.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fixedb",
        description="Lag-window variance estimation and fixed-b confidence "
                    "intervals for MCMC output")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quantiles", help="simulate fixed-b critical values")
    p.add_argument("--kernel", required=True)
    p.add_argument("--levels", default="0.05,0.025",
                   help="comma-separated tail probabilities")
    p.add_argument("--draws", type=int, default=DEFAULT_TABLE_DRAWS)
    p.add_argument("--seed", type=int, default=DEFAULT_TABLE_SEED)
    p.add_argument("--method", choices=("eigen", "ito"), default="eigen")
    p.add_argument("--m", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--outdir", default=None)
    p.set_defaults(fn=cmd_quantiles)

    p = sub.add_parser("cdf", help="empirical CDF table of the fixed-b limit")
    p.add_argument("--kernel", required=True,
                   help="kernel id or comma-separated list")
    p.add_argument("--grid", default="-30:30:601", help="lo:hi:count")
    p.add_argument("--draws", type=int, default=200000)
    p.add_argument("--seed", type=int, default=DEFAULT_TABLE_SEED)
    p.add_argument("--out", default=None)
    p.add_argument("--outdir", default=None)
    p.set_defaults(fn=cmd_cdf)

    p = sub.add_parser("eigs", help="Nystrom spectrum of the centered kernel")
    p.add_argument("--kernel", required=True)
    p.add_argument("--m", type=int, default=500)
    p.add_argument("--trace-fraction", type=float, default=0.999)
    p.add_argument("--outdir", default=None)
    p.set_defaults(fn=cmd_eigs)

    p = sub.add_parser("estimate",
                       help="variance estimate + CI from a CSV series")
    p.add_argument("--input", required=True)
    p.add_argument("--cn", required=True,
                   help="integer | npow:DELTA | n")
    p.add_argument("--kernel", default="bartlett")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--table", default=None,
                   help="JSON quantile table for the fixed-b interval")
    p.add_argument("--outdir", default=None)
    p.set_defaults(fn=cmd_estimate)

    p = sub.add_parser("coverage", help="coverage study over a delta grid")
    p.add_argument("--model", required=True,
                   help="iid | ar1:RHO | toy | toy:RATE | logistic")
    p.add_argument("--deltas", default="0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9")
    p.add_argument("--kernels", default="bartlett,quadratic")
    p.add_argument("--K", type=int, default=200)
    p.add_argument("--n", type=int, default=5120)
    p.add_argument("--burnin", type=int, default=1024)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=DEFAULT_TABLE_SEED)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--tables-dir", default=None)
    p.add_argument("--outdir", default=None)
    p.set_defaults(fn=cmd_coverage)

    p = sub.add_parser("rate", help="convergence-rate study on AR(1)")
    p.add_argument("--rho", type=float, default=0.5)
    p.add_argument("--ngrid", default="4096,8192,16384,32768,65536")
    p.add_argument("--rules", default="npow:0.3333333333333333,"
                                      "npow:0.6666666666666666,n")
    p.add_argument("--R", type=int, default=500)
    p.add_argument("--kernel", default="bartlett")
    p.add_argument("--seed", type=int, default=DEFAULT_TABLE_SEED)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--outdir", default=None)
    p.set_defaults(fn=cmd_rate)

    p = sub.add_parser("toy", help="toy multi-limit study")
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--n", type=int, default=250000)
    p.add_argument("--burnin", type=int, default=50000)
    p.add_argument("--target-rate", type=float, default=0.29)
    p.add_argument("--seed", type=int, default=DEFAULT_TABLE_SEED)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--outdir", default=None)
    p.set_defaults(fn=cmd_toy)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (IOError, OSError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NonStudentizableError, KernelNotPositiveDefiniteError,
            MissingTableRowError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # DomainError subclasses ValueError: bad configuration or bad input
        if isinstance(exc, DomainError):
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
