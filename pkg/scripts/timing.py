"""Optimizer wall time of the adaptive soliton run as a function of r.

Usage: python scripts/timing.py [--repeat 3]
"""
import argparse

from optparam import kdv
from optparam.benchmarks import get_benchmark
from optparam.optimizer import OptimizerConfig, algorithm1_adaptive


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args()
    b = get_benchmark("kdv-soliton")
    g = b.grid()
    base = None
    for r in (1, 2, 4, 5, 10):
        best = min(
            algorithm1_adaptive(kdv.EC(g), b.initial(g), b.dt, 25, OptimizerConfig(r=r)).optimizer_time
            for _ in range(args.repeat)
        )
        base = base or best
        print(f"r={r:2d}  optimizer time {best:.3f} s  ratio to r=1 {best / base:.2f}")


if __name__ == "__main__":
    main()
