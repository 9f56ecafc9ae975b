"""Reference problems with closed-form solutions, and their default setups."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import Boundary, Grid1D


class UnknownBenchmark(KeyError):
    pass


def kdv_soliton(x, t):
    """3 sech^2((x - t + 5) / 2): a unit-speed soliton starting at x = -5."""
    return 3.0 / np.cosh(0.5 * (np.asarray(x, dtype=float) - t + 5.0)) ** 2


def kdv_two_soliton(x, t, c1=2.0, c2=1.0, d1=17.0, d2=10.0):
    """Two solitons with speeds c1 > c2; the faster one starts behind (at -d1)."""
    x = np.asarray(x, dtype=float)
    s1, s2 = np.sqrt(c1), np.sqrt(c2)
    # a soliton of speed c has width parameter sqrt(c)/2
    xi1 = 0.5 * s1 * (x + d1 - c1 * t)
    xi2 = 0.5 * s2 * (x + d2 - c2 * t)
    num = 12.0 * (c1 - c2) * (c1 * np.cosh(xi2) ** 2 + c2 * np.sinh(xi1) ** 2)
    den = (s1 - s2) * np.cosh(xi1 + xi2) + (s1 + s2) * np.cosh(xi1 - xi2)
    return num / den**2


def nlh_wave(x, t):
    """Linear wave t - x entering an undisturbed medium with unit speed."""
    x = np.asarray(x, dtype=float)
    return np.where(t > x, t - x, 0.0)


def nlh_barenblatt(x, t):
    x = np.asarray(x, dtype=float)
    s = (t + 1.0) ** (2.0 / 3.0)
    return (t + 1.0) ** (-1.0 / 3.0) * np.maximum(1.0 - x * x / (6.0 * s), 0.0)


@dataclass(frozen=True)
class Benchmark:
    name: str
    equation: str  # "KdV" or "NLH"
    exact: Callable
    a: float
    b: float
    dx: float
    dt: float
    T: float
    boundary: Boundary

    def grid(self, dx: float | None = None, a: float | None = None, b: float | None = None) -> Grid1D:
        return Grid1D.from_spacing(
            self.a if a is None else a, self.b if b is None else b, self.dx if dx is None else dx, self.boundary
        )

    def initial(self, grid: Grid1D) -> np.ndarray:
        return self.exact(grid.x, 0.0)


# u(0, t) = t on the left. The right boundary sits at x = 6, where the exact
# solution vanishes for all t <= 3.
_WAVE_BC = Boundary.dirichlet(lambda t: t, lambda t: 0.0, lambda t: 1.0, lambda t: 0.0)

BENCHMARKS: dict[str, Benchmark] = {
    b.name: b
    for b in (
        Benchmark("kdv-soliton", "KdV", kdv_soliton, -20.0, 20.0, 0.05, 0.4, 10.0, Boundary.periodic()),
        Benchmark("kdv-two-soliton", "KdV", kdv_two_soliton, -30.0, 30.0, 0.05, 0.25, 15.0, Boundary.periodic()),
        Benchmark("nlh-wave", "NLH", nlh_wave, 0.0, 6.0, 0.025, 0.12, 3.0, _WAVE_BC),
        Benchmark("nlh-barenblatt", "NLH", nlh_barenblatt, -6.0, 6.0, 0.02, 0.09, 9.0, Boundary.zero()),
    )
}


def get_benchmark(name: str) -> Benchmark:
    try:
        return BENCHMARKS[name]
    except KeyError:
        raise UnknownBenchmark(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}") from None


def exact_solution(benchmark: str, x, t: float) -> np.ndarray:
    return get_benchmark(benchmark).exact(x, t)
