"""Reproduce the four comparison tables, including the brute-force reference rows.

Usage: python scripts/reproduce_tables.py [--out DIR] [--rs 1,2,4,10]
"""
import argparse
import logging
from pathlib import Path

from optparam.config import ScenarioConfig
from optparam.runner import TABLE_BENCHMARKS, brute_force_chi, run_scenario, run_table, write_table

# sweep ranges for the brute-force rows (a single parameter each)
SWEEPS = {
    "kdv-soliton": ("EC", 0.0, 0.04, 0.001),
    "kdv-two-soliton": ("EC", 0.0, 0.04, 0.001),
    "nlh-wave": ("CS", -0.012, 0.0, 0.0002),
    "nlh-barenblatt": ("CS", -0.002, 0.0, 0.00002),
}


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", default="out/tables")
    p.add_argument("--rs", default="1,2,4,10")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    rs = tuple(int(r) for r in args.rs.split(","))
    out = Path(args.out)
    for table, bench in TABLE_BENCHMARKS.items():
        rows = run_table(table, out, rs)
        scheme, lo, hi, step = SWEEPS[bench]
        cfg = ScenarioConfig(bench, scheme, "fixed")
        sweep = brute_force_chi(cfg, lo, hi, step)
        best = run_scenario(cfg.replace(chi=tuple(sweep.chi.values)))
        best.method = f"{scheme}(chi*)={best.method}"
        rows.insert(0, best)
        write_table(rows, out / f"table{table}.csv")
        print(f"\ntable {table} ({bench})")
        for rec in rows:
            print("  " + ",".join(rec.table_row()))


if __name__ == "__main__":
    main()
