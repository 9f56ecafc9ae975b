"""Solution error and conservation-law error metrics of a finished run."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

from .grid import Grid1D
from .optimizer import RunRecord
from .scheme import NotPreserved, Scheme


class LawNotDefined(KeyError):
    """The scheme has no discrete form of the requested conservation law."""


class Mode(enum.Enum):
    LOCAL_DIRICHLET = "LocalDirichlet"
    GLOBAL_PERIODIC = "GlobalPeriodic"


class SolutionError(float):
    """A float carrying whether it is relative (False when the exact norm is 0)."""

    relative: bool

    def __new__(cls, value: float, relative: bool = True):
        obj = super().__new__(cls, value)
        obj.relative = relative
        return obj


def relative_l2_error(u, exact: Union[Callable, np.ndarray], grid: Grid1D) -> SolutionError:
    """||u - exact|| / ||exact|| in the discrete L2 norm.

    ``exact`` is either a function of the node vector or its values there. If
    the exact solution vanishes on the grid, the absolute error is returned
    with ``relative=False``.
    """
    ref = np.asarray(exact(grid.x) if callable(exact) else exact, dtype=float)
    u = np.asarray(u, dtype=float)
    if ref.shape != u.shape:
        raise ValueError(f"exact solution has shape {ref.shape}, field has {u.shape}")
    diff = np.sqrt(grid.dx * np.sum((u - ref) ** 2))
    norm = np.sqrt(grid.dx * np.sum(ref**2))
    if norm == 0.0:
        return SolutionError(diff, relative=False)
    return SolutionError(diff / norm)


def pointwise_error(u, exact: Union[Callable, np.ndarray], grid: Grid1D) -> np.ndarray:
    ref = np.asarray(exact(grid.x) if callable(exact) else exact, dtype=float)
    return np.abs(np.asarray(u, dtype=float) - ref)


def _check_law(scheme: Scheme, law: int, chi, t: float, u) -> None:
    if law not in scheme.densities(u, chi, t):
        raise LawNotDefined(f"{scheme.name} has no law {law}")


def _times(run: RunRecord):
    return [run.t0 + n * run.dt for n in range(run.N + 1)]


def _local_series(run: RunRecord, law: int, scheme: Scheme) -> np.ndarray:
    """|F_{M+1} - F_1 + dx sum_m D_dt G| per step n = 0..N-1."""
    chi = run.law_chi(scheme.n_params)
    ts = _times(run)
    dx = scheme.grid.dx
    out = np.empty(run.N)
    for n in range(run.N):
        u, v = run.trajectory[n], run.trajectory[n + 1]
        G0 = scheme.densities(u, chi, ts[n])[law]
        G1 = scheme.densities(v, chi, ts[n + 1])[law]
        F = scheme.fluxes(u, v, run.dt, chi, ts[n])[law]
        # a flux at the M+1 half nodes carries the boundary terms; a periodic flux telescopes away
        edge = F[-1] - F[0] if F.size == scheme.grid.n + 1 else 0.0
        out[n] = abs(edge + dx * np.sum(G1 - G0) / run.dt)
    return out


def _global_series(run: RunRecord, law: int, scheme: Scheme) -> np.ndarray:
    """dx |sum_m (G(u_n) - G(u_0))| per n = 1..N."""
    chi = run.law_chi(scheme.n_params)
    ts = _times(run)
    dx = scheme.grid.dx
    g0 = np.sum(scheme.densities(run.trajectory[0], chi, ts[0])[law])
    return np.array(
        [dx * abs(np.sum(scheme.densities(run.trajectory[n], chi, ts[n])[law]) - g0) for n in range(1, run.N + 1)]
    )


def conservation_error_local(run: RunRecord, law: int, scheme: Scheme) -> float:
    """max over steps of |F_{M+1} - F_1 + dx sum_m D_dt G_k|.

    This is the local law summed over the grid, so boundary fluxes enter and
    the metric applies to Dirichlet problems. Adaptive runs are measured with
    every parameter set to zero.
    """
    if run.N < 1:
        raise ValueError("the run has no steps")
    _check_law(scheme, law, run.law_chi(scheme.n_params), run.t0, run.trajectory[0])
    return float(np.max(_local_series(run, law, scheme)))


def conservation_error_global(run: RunRecord, law: int, scheme: Scheme) -> float:
    """dx max_n |sum_m (G_k(u_n) - G_k(u_0))|, the drift of a global invariant."""
    if run.N < 1:
        raise ValueError("the run has no steps")
    _check_law(scheme, law, run.law_chi(scheme.n_params), run.t0, run.trajectory[0])
    return float(np.max(_global_series(run, law, scheme)))


@dataclass
class ConservationReport:
    """Errors per law.

    ``None`` marks a law the scheme does not define; a ``NotPreserved`` value
    is a measured error of a law the scheme does not conserve by construction.
    """

    mode: Mode
    errors: dict[int, float | None] = field(default_factory=dict)
    worst_step: dict[int, int | None] = field(default_factory=dict)

    def __post_init__(self):
        if any(e is not None and e < 0 for e in self.errors.values()):
            raise ValueError("conservation errors are non-negative")

    def get(self, law: int):
        return self.errors.get(law)


def conservation_report(run: RunRecord, scheme: Scheme, laws=(1, 2, 3), mode: Mode | None = None) -> ConservationReport:
    """Evaluate each requested law; periodic grids default to the global form."""
    if mode is None:
        mode = Mode.GLOBAL_PERIODIC if scheme.grid.boundary.is_periodic else Mode.LOCAL_DIRICHLET
    rep = ConservationReport(mode)
    series = _global_series if mode is Mode.GLOBAL_PERIODIC else _local_series
    chi = run.law_chi(scheme.n_params)
    defined = scheme.densities(run.trajectory[0], chi, run.t0)
    for k in laws:
        if k not in defined or run.N < 1:
            rep.errors[k], rep.worst_step[k] = (None, None) if k not in defined else (0.0, None)
            continue
        s = series(run, k, scheme)
        i = int(np.argmax(s))
        rep.errors[k] = float(s[i]) if k in scheme.preserved else NotPreserved(s[i])
        # the local series is indexed by step n = 0.., the global one by n = 1..
        rep.worst_step[k] = i + 1 if mode is Mode.GLOBAL_PERIODIC else i
    return rep
