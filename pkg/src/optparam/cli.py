"""Command-line entry point: ``optparam run|sweep|suggest-r|tables|figures``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from .config import MODES, ConfigError, ScenarioConfig, load_config
from .optimizer import suggest_r
from .runner import (
    TABLE_BENCHMARKS,
    brute_force_chi,
    emit_outputs,
    run_figures,
    run_scenario,
    run_table,
)

log = logging.getLogger("optparam")


def _chi_list(s: str) -> tuple[float, ...]:
    try:
        return tuple(float(c) for c in s.split(",") if c.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"--chi expects comma-separated numbers, got {s!r}") from None


def _int_list(s: str) -> tuple[int, ...]:
    try:
        return tuple(int(c) for c in s.split(",") if c.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {s!r}") from None


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--r", type=int, help="coarsening factor of the optimisation grid")
    p.add_argument("--mode", choices=MODES, help="parameter mode")
    p.add_argument("--chi", type=_chi_list, help="comma-separated parameter values")
    p.add_argument("--out", help="output directory")
    p.add_argument(
        "--seedless",
        action="store_true",
        help="accepted for scripting; every computation here is deterministic, so it changes nothing",
    )
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="optparam", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run one scenario and write its outputs")
    p.add_argument("config")

    p = sub.add_parser("sweep", parents=[common], help="brute-force search of the parameters (needs the exact solution)")
    p.add_argument("config")
    p.add_argument("--lo", type=float)
    p.add_argument("--hi", type=float)
    p.add_argument("--step", type=float)
    p.add_argument("--refine", action="store_true", default=None)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("suggest-r", parents=[common], help="print the suggested coarsening factor")
    p.add_argument("config")

    p = sub.add_parser("tables", parents=[common], help="reproduce the comparison tables")
    p.add_argument("--table", type=_int_list, default=tuple(TABLE_BENCHMARKS), help="e.g. 1,3")
    p.add_argument("--rs", type=_int_list, default=(1, 2, 4, 10), help="values of r")

    p = sub.add_parser("figures", parents=[common], help="write parameter sequences and pointwise errors")
    p.add_argument("--benchmark", action="append", help="repeatable; default: all four")
    p.add_argument("--rs", type=_int_list, default=(1, 2, 4, 10), help="values of r")
    return parser


def _config(args) -> ScenarioConfig:
    cfg = load_config(args.config)
    return cfg.replace(r=args.r, mode=args.mode, chi=args.chi, out=args.out).validate()


def _cmd_run(args) -> int:
    cfg = _config(args)
    rec = run_scenario(cfg)
    paths = emit_outputs(rec, cfg.out, pointwise=cfg.pointwise)
    print(",".join(rec.table_row()))
    for kind, path in paths.items():
        log.info("wrote %s: %s", kind, path)
    if rec.failed:
        print(f"run failed: {rec.failed}", file=sys.stderr)
    return 0 if rec.ok else 1


def _cmd_sweep(args) -> int:
    cfg = _config(args)
    res = brute_force_chi(cfg, args.lo, args.hi, args.step, args.refine, args.workers)
    k = res.points.shape[1]
    path = Path(cfg.out) / f"{cfg.scenario_id}_sweep.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"chi_{j + 1}" for j in range(k)] + ["sol_err"])
        for p, e in zip(res.points, res.errors):
            w.writerow([repr(float(c)) for c in p] + [repr(float(e))])
    print("chi*=" + ",".join(repr(float(c)) for c in res.chi.values) + f" sol_err={res.error!r}")
    return 0 if res.error < float("inf") else 1


def _cmd_suggest_r(args) -> int:
    cfg = _config(args)
    print(suggest_r(cfg.grid(), cfg.resolved("dt")))
    return 0


def _cmd_tables(args) -> int:
    out = args.out or "out"
    ok = True
    for t in args.table:
        if t not in TABLE_BENCHMARKS:
            raise ConfigError(f"no table {t}; choose from {sorted(TABLE_BENCHMARKS)}")
        rows = run_table(t, out, args.rs)
        print(f"table {t} ({TABLE_BENCHMARKS[t]}): {Path(out) / f'table{t}.csv'}")
        for rec in rows:
            print("  " + ",".join(rec.table_row()))
        ok = ok and all(rec.ok for rec in rows)
    return 0 if ok else 1


def _cmd_figures(args) -> int:
    out = args.out or "out"
    ok = True
    for bench in args.benchmark or list(TABLE_BENCHMARKS.values()):
        recs = run_figures(bench, out, args.rs)
        print(f"{bench}: {len(recs)} runs written to {out}")
        ok = ok and all(rec.ok for rec in recs)
    return 0 if ok else 1


COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "suggest-r": _cmd_suggest_r,
    "tables": _cmd_tables,
    "figures": _cmd_figures,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
