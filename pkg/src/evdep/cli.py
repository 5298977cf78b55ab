"""Command-line entry point.

    evdep estimate --data d.csv --t 0.5 --estimator adaptive
    evdep ci --data d.csv --t-grid 0.1:0.9:0.1 --level 0.9 --level 0.95
    evdep simulate --config table1 --seed 42 --out cov.csv

Exit codes: 0 success, 2 data error, 3 inference infeasible, 64 usage error.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from evdep.empirical import KERNELS, pseudo_observations, read_csv_pairs
from evdep.errors import EmptyIntervalError, EvdepError, InfeasibleThetaError, NoRootError, ParameterError, TieError
from evdep.estimators import (
    KnownMarginSample,
    adaptive_weighted,
    cfg_rank,
    known_margin_estimate,
    pickands_rank,
    project_to_envelope,
    weighted_closed_form,
)
from evdep.jel import JelConfig, JelFit, TuningWarning
from evdep.simulation import (
    ConfigError,
    ExperimentConfig,
    emit_report,
    load_bundled_config,
    parse_weight,
    resolve_threads,
    run_experiment,
)

EXIT_OK = 0
EXIT_DATA = 2
EXIT_INFEASIBLE = 3
EXIT_USAGE = 64

log = logging.getLogger("evdep")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _t_values(args) -> list[float]:
    ts: list[float] = list(args.t or [])
    if args.t_grid:
        try:
            lo, hi, step = (float(x) for x in args.t_grid.split(":"))
        except ValueError:
            raise UsageError(f"--t-grid expects lo:hi:step, got {args.t_grid!r}") from None
        if step <= 0 or hi < lo:
            raise UsageError("--t-grid needs step > 0 and hi >= lo")
        k = int(np.floor((hi - lo) / step + 1e-9))
        ts.extend(round(lo + i * step, 12) for i in range(k + 1))
    if not ts:
        raise UsageError("give at least one --t or a --t-grid")
    for t in ts:
        if not 0.0 <= t <= 1.0:
            raise UsageError(f"t={t} is outside [0, 1]")
    return ts


def _estimator(name: str):
    """Map an estimator selector to ``f(ps, t)``."""
    key = name.strip().lower()
    if key == "p":
        return pickands_rank
    if key in ("d", "ht"):
        variant = key.upper()

        # known-margin formulas pair t with the first margin; reflect so that
        # t pairs with the second, as in C(u^(1-t), u^t)
        def known(ps, t):
            return known_margin_estimate(KnownMarginSample(ps.z), 1.0 - t, variant)

        return known
    if key == "cfg":
        return cfg_rank
    if key == "adaptive":
        return adaptive_weighted
    if key.startswith("weighted:"):
        try:
            q = float(key.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad weighted exponent in {name!r}") from None
        if not 0.0 <= q <= 1.0:
            raise UsageError("weighted:q needs q in [0, 1]")
        return lambda ps, t: weighted_closed_form(ps, t, q)
    raise UsageError(f"unknown estimator {name!r}; use p|d|ht|cfg|weighted:q|adaptive")


def _load(args):
    data = read_csv_pairs(args.data, header=args.header)
    return pseudo_observations(data)


def _writer(out):
    return csv.writer(out, lineterminator="\n")


def cmd_estimate(args, out) -> int:
    ts = _t_values(args)
    fn = _estimator(args.estimator)
    ps = _load(args)
    est = np.array([fn(ps, t) for t in ts])
    if args.project:
        est = project_to_envelope(ts, est)
    w = _writer(out)
    w.writerow(["t", "estimate"])
    for t, a in zip(ts, est):
        w.writerow([f"{t:.6f}", f"{a:.6f}"])
    return EXIT_OK


def _jel_config(args, n: int) -> JelConfig:
    kw = {}
    if args.h is not None:
        kw["h"] = args.h
    if args.an is not None:
        kw["a_n"] = args.an
    if args.bn is not None:
        kw["b_n"] = args.bn
    try:
        kw["weight"] = parse_weight(args.weight)
        kw["kernel"] = KERNELS[args.kernel]
        return JelConfig(**kw)
    except ParameterError as exc:
        raise UsageError(str(exc)) from None


def cmd_ci(args, out) -> int:
    ts = _t_values(args)
    for t in ts:
        if not 0.0 < t < 1.0:
            raise UsageError(f"confidence intervals need t in (0, 1), got {t}")
    levels = args.level or [0.95]
    for lv in levels:
        if not 0.0 < lv < 1.0:
            raise UsageError(f"--level must lie in (0, 1), got {lv}")
    ps = _load(args)
    cfg = _jel_config(args, ps.n)
    desc = cfg.describe(ps.n)
    print("# JEL config: " + ", ".join(f"{k}={v}" for k, v in desc.items()), file=sys.stderr)
    w = _writer(out)
    w.writerow(["t", "level", "lo", "hi", "point"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TuningWarning)
        for t in ts:
            fit = JelFit.build(ps, t, cfg)
            point = fit.point_estimate()
            for lv in levels:
                iv = fit.interval(lv, point)
                if iv.lo_open or iv.hi_open:
                    print(f"# t={t:g} level={lv:g}: interval reached the search limit", file=sys.stderr)
                w.writerow([f"{t:.6f}", f"{lv:.6f}", f"{iv.lo:.6f}", f"{iv.hi:.6f}", f"{iv.point:.6f}"])
    return EXIT_OK


def _load_config(name: str) -> ExperimentConfig:
    path = Path(name)
    if path.exists():
        return ExperimentConfig.from_json(path)
    if path.suffix == "" or path.name in ("table1.json", "figure1.json"):
        try:
            return load_bundled_config(path.stem)
        except FileNotFoundError:
            pass
    raise UsageError(f"config {name!r} not found (bundled: table1, figure1)")


def cmd_simulate(args, out) -> int:
    cfg = _load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.replicates is not None:
        if args.replicates < 1:
            raise UsageError("--replicates must be >= 1")
        cfg.replicates = args.replicates
    threads = resolve_threads(args.threads)
    report = run_experiment(cfg, threads=threads, include_optional=args.include_optional_sizes)
    if args.out:
        fmt = args.format or ("json" if str(args.out).endswith(".json") else "csv")
        emit_report(report, fmt, args.out)
    w = _writer(out)
    w.writerow(report.columns)
    for row in report.rows:
        w.writerow([f"{row[c]:.6f}" if isinstance(row[c], float) else row[c] for c in report.columns])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="evdep", description="Pickands dependence function estimation and JEL intervals.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_args(sp):
        sp.add_argument("--data", required=True, help="two-column numeric CSV")
        hdr = sp.add_mutually_exclusive_group()
        hdr.add_argument("--header", dest="header", action="store_true", default=None)
        hdr.add_argument("--no-header", dest="header", action="store_false")
        sp.add_argument("--t", type=float, action="append", help="evaluation point (repeatable)")
        sp.add_argument("--t-grid", help="lo:hi:step, inclusive")

    est = sub.add_parser("estimate", help="point estimates of A(t)")
    data_args(est)
    est.add_argument("--estimator", default="adaptive", help="p|d|ht|cfg|weighted:q|adaptive")
    est.add_argument("--project", action="store_true", help="project onto the Pickands envelope (convex minorant)")
    est.set_defaults(func=cmd_estimate)

    ci = sub.add_parser("ci", help="JEL confidence intervals for A(t)")
    data_args(ci)
    ci.add_argument("--level", type=float, action="append")
    ci.add_argument("--h", type=float, help="bandwidth (default 0.5 n^(-1/3))")
    ci.add_argument("--an", type=float, help="lower trimming (default 0.1)")
    ci.add_argument("--bn", type=float, help="upper trimming (default 0.1)")
    ci.add_argument("--weight", default="adaptive", help="adaptive|powerlog:q")
    ci.add_argument("--kernel", default="biweight", choices=sorted(KERNELS))
    ci.set_defaults(func=cmd_ci)

    sim = sub.add_parser("simulate", help="run a Monte Carlo study")
    sim.add_argument("--config", required=True, help="JSON config path or bundled name (table1, figure1)")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--replicates", type=int)
    sim.add_argument("--out")
    sim.add_argument("--format", choices=["csv", "json"])
    sim.add_argument("--threads", type=int, help="worker processes; 0 = all cores (env EVDEP_THREADS)")
    sim.add_argument("--include-optional-sizes", action="store_true", help="also run optional sizes such as n=5000")
    sim.set_defaults(func=cmd_simulate)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"evdep: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"evdep: config error at {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleThetaError, EmptyIntervalError, NoRootError) as exc:
        print(f"evdep: inference infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except TieError as exc:
        print(f"evdep: {exc}; jitter the data or break ties before ranking", file=sys.stderr)
        return EXIT_DATA
    except (EvdepError, OSError) as exc:
        print(f"evdep: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
