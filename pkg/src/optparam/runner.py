"""Scenario execution, the brute-force parameter oracle, and result files."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import kdv, nlh
from .benchmarks import get_benchmark
from .config import ScenarioConfig
from .defect import ParamVector
from .diagnostics import conservation_report, pointwise_error, relative_l2_error
from .grid import Grid1D
from .optimizer import RunRecord, algorithm1_adaptive, algorithm2_fixed, run_fixed
from .scheme import Scheme

log = logging.getLogger(__name__)

TABLE_HEADER = ("method", "err1", "err2", "err3", "sol_err", "time_s")
LAWS = {"KdV": (1, 2, 3), "NLH": (1, 2)}
_SCHEMES = {"EC": kdv.EC, "MC": kdv.MC, "MS": kdv.Multisymplectic, "NB": kdv.NarrowBox, "CS": nlh.CS}


def make_scheme(name: str, grid: Grid1D, exact_dtphi: bool = False) -> Scheme:
    if name == "MC":
        return kdv.MC(grid, exact_dtphi=exact_dtphi)
    return _SCHEMES[name](grid)


@dataclass
class ResultRecord:
    """Metrics of one scenario, laid out like a row of the comparison tables."""

    scenario: str
    benchmark: str
    scheme: str
    mode: str
    method: str
    r: int
    dt: float
    N: int
    sol_err: Optional[float]
    sol_err_relative: bool
    errors: dict
    conservation_mode: str
    chi: Optional[list]
    chi_sequence: list
    times: list
    iterations: list
    clamp_count: int
    nonconverged: int
    time_s: float
    optimizer_time: float
    failed: Optional[str] = None
    n_params: int = 0
    x: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    abs_error: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @property
    def ok(self) -> bool:
        metrics = [self.sol_err, *self.errors.values()]
        return self.failed is None and all(m is not None and np.isfinite(m) for m in metrics)

    def table_row(self) -> list[str]:
        def cell(v):
            return "" if v is None else repr(float(v))

        e = self.errors
        return [self.method, cell(e.get(1)), cell(e.get(2)), cell(e.get(3)), cell(self.sol_err), cell(self.time_s)]

    def to_json(self) -> str:
        d = dataclasses.asdict(self)
        d.pop("x")
        d.pop("abs_error")
        d["errors"] = {str(k): v for k, v in self.errors.items()}
        return json.dumps(d, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ResultRecord":
        d = json.loads(text)
        d["errors"] = {int(k): v for k, v in d["errors"].items()}
        return cls(**d)


def _fmt(chi) -> str:
    return ",".join(f"{c:.3g}" for c in chi)


def method_label(cfg: ScenarioConfig, chi=None) -> str:
    if cfg.scheme in ("MS", "NB"):
        return {"MS": "Multisymplectic", "NB": "NarrowBox"}[cfg.scheme]
    if cfg.mode == "adaptive":
        return f"{cfg.scheme}(chi*_{cfg.r},n)"
    if cfg.mode == "averaged":
        return f"{cfg.scheme}(chibar*_{cfg.r})={cfg.scheme}({_fmt(chi)})"
    return f"{cfg.scheme}({_fmt(chi)})"


def _fixed_chi(cfg: ScenarioConfig, scheme: Scheme) -> np.ndarray:
    chi = np.asarray(cfg.chi, dtype=float)
    if chi.size == 0:
        return np.zeros(scheme.n_params)
    if chi.size != scheme.n_params:
        raise ValueError(f"{cfg.scheme} takes {scheme.n_params} parameters, got {chi.size}")
    return chi


def execute(cfg: ScenarioConfig) -> tuple[RunRecord, Scheme]:
    """Run the numerical procedure of a scenario (no metrics)."""
    cfg.validate()
    bench = get_benchmark(cfg.benchmark)
    grid = cfg.grid()
    scheme = make_scheme(cfg.scheme, grid, cfg.exact_dtphi)
    dt, N = cfg.resolved("dt"), cfg.n_steps
    u0 = bench.initial(grid)
    if cfg.mode == "fixed" or scheme.n_params == 0:
        return run_fixed(scheme, u0, dt, N, _fixed_chi(cfg, scheme)), scheme
    chi0 = cfg.chi or None
    if cfg.mode == "adaptive":
        return algorithm1_adaptive(scheme, u0, dt, N, cfg.optimizer(), chi0), scheme
    return algorithm2_fixed(scheme, u0, dt, N, cfg.optimizer(), chi0), scheme


def summarize(cfg: ScenarioConfig, run: RunRecord, scheme: Scheme) -> ResultRecord:
    bench = get_benchmark(cfg.benchmark)
    grid = scheme.grid
    n_done = run.N
    t_end = run.t0 + n_done * run.dt
    u = run.trajectory[-1]
    exact = bench.exact(grid.x, t_end)
    err = relative_l2_error(u, exact, grid)
    if n_done >= 1:
        rep = conservation_report(run, scheme, LAWS[bench.equation])
        errors, mode = rep.errors, rep.mode.value
    else:
        errors, mode = {k: 0.0 for k in LAWS[bench.equation]}, "none"
    chi = run.chi_bar if run.chi_bar is not None else run.fixed_chi
    return ResultRecord(
        scenario=cfg.scenario_id,
        benchmark=cfg.benchmark,
        scheme=cfg.scheme,
        mode=cfg.mode if scheme.n_params else "fixed",
        method=method_label(cfg, chi),
        r=cfg.r,
        dt=run.dt,
        N=n_done,
        sol_err=float(err),
        sol_err_relative=err.relative,
        errors=errors,
        conservation_mode=mode,
        chi=None if chi is None else [float(c) for c in np.atleast_1d(chi)],
        chi_sequence=[[float(c) for c in np.atleast_1d(x)] for x in run.chi_sequence],
        times=[run.t0 + n * run.dt for n in range(len(run.chi_sequence))],
        iterations=[int(k) for k in run.iterations],
        clamp_count=run.clamp_count,
        nonconverged=run.nonconverged,
        time_s=run.wall_time,
        optimizer_time=run.optimizer_time,
        failed=run.failed,
        n_params=scheme.n_params,
        x=grid.x,
        abs_error=pointwise_error(u, exact, grid),
    )


def run_scenario(cfg: ScenarioConfig, write: bool = False) -> ResultRecord:
    """Build, run and measure a scenario; optionally write its output files to ``cfg.out``."""
    run, scheme = execute(cfg)
    rec = summarize(cfg, run, scheme)
    if write:
        emit_outputs(rec, cfg.out, pointwise=cfg.pointwise)
    return rec


# ------------------------------------------------------------ brute force


@dataclass
class SweepResult:
    chi: ParamVector
    error: float
    points: np.ndarray
    errors: np.ndarray


def _sweep_axis(lo: float, hi: float, step: float) -> np.ndarray:
    if hi < lo:
        raise ValueError("sweep_hi must be >= sweep_lo")
    if step <= 0 or hi == lo:
        return np.array([lo])
    k = int(np.floor((hi - lo) / step + 1e-9))
    return lo + step * np.arange(k + 1)


def _final_error(cfg: ScenarioConfig, chi) -> float:
    rec = run_scenario(cfg.replace(mode="fixed", chi=tuple(chi)))
    return float("inf") if rec.failed else float(rec.sol_err)


def _evaluate(cfg: ScenarioConfig, pts: np.ndarray, workers: int) -> np.ndarray:
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(lambda p: _final_error(cfg, p), pts)))


def brute_force_chi(
    cfg: ScenarioConfig,
    lo: float | None = None,
    hi: float | None = None,
    step: float | None = None,
    refine: bool | None = None,
    workers: int | None = None,
) -> SweepResult:
    """Minimise the final solution error over a uniform parameter grid.

    This needs the exact solution, so it is a reference oracle only; the
    optimisation algorithms never call it. Every parameter uses the same axis
    [lo, hi] (default: the box Omega). With ``refine`` one more sweep with a
    ten times finer step is made around the best point.
    """
    grid = cfg.grid()
    scheme = make_scheme(cfg.scheme, grid, cfg.exact_dtphi)
    if scheme.n_params == 0:
        raise ValueError(f"{cfg.scheme} has no free parameters")
    box_lo, box_hi = scheme.box(cfg.resolved("dt"))
    lo = cfg.sweep_lo if lo is None else lo
    hi = cfg.sweep_hi if hi is None else hi
    lo = float(box_lo[0]) if lo is None else lo
    hi = float(box_hi[0]) if hi is None else hi
    step = cfg.sweep_step if step is None else step
    step = (hi - lo) / 40 if step is None else step
    refine = cfg.sweep_refine if refine is None else refine
    workers = workers or min(8, os.cpu_count() or 1)

    axis = _sweep_axis(lo, hi, step)
    pts = np.stack(np.meshgrid(*[axis] * scheme.n_params, indexing="ij"), axis=-1).reshape(-1, scheme.n_params)
    errs = _evaluate(cfg, pts, workers)
    if refine and axis.size > 1:
        best = pts[int(np.argmin(errs))]
        axes = [_sweep_axis(max(lo, b - step), min(hi, b + step), step / 10) for b in best]
        fine = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, scheme.n_params)
        pts = np.vstack([pts, fine])
        errs = np.concatenate([errs, _evaluate(cfg, fine, workers)])
    i = int(np.argmin(errs))
    return SweepResult(ParamVector(pts[i], box_lo, box_hi), float(errs[i]), pts, errs)


# ------------------------------------------------------------ output files


def _open_for_write(path: Path):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_table(rows: Sequence[ResultRecord], path) -> Path:
    path = Path(path)
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TABLE_HEADER)
        for rec in rows:
            w.writerow(rec.table_row())
    return path


def write_chi_sequence(rec: ResultRecord, path, n_params: int | None = None) -> Path:
    path = Path(path)
    k = rec.n_params if n_params is None else n_params
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["n", "t"] + [f"chi_{j + 1}" for j in range(k)])
        for n, (t, chi) in enumerate(zip(rec.times, rec.chi_sequence)):
            w.writerow([n, repr(t)] + [repr(c) for c in chi])
    return path


def write_pointwise(rec: ResultRecord, path) -> Path:
    path = Path(path)
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "abs_error"])
        for xi, ei in zip(rec.x, rec.abs_error):
            w.writerow([repr(float(xi)), repr(float(ei))])
    return path


def emit_outputs(rec: ResultRecord, out_dir, pointwise: bool = True) -> dict[str, Path]:
    """Write the table row, the parameter sequence, the JSON record and (optionally) pointwise errors."""
    out = Path(out_dir)
    stem = rec.scenario
    paths = {
        "table": write_table([rec], out / f"{stem}_table.csv"),
        "chi": write_chi_sequence(rec, out / f"{stem}_chi.csv"),
    }
    json_path = out / f"{stem}.json"
    with _open_for_write(json_path) as fh:
        fh.write(rec.to_json())
    paths["json"] = json_path
    if pointwise and rec.x is not None:
        paths["pointwise"] = write_pointwise(rec, out / f"{stem}_pointwise.csv")
    return paths


# ------------------------------------------------------------ table and figure batches

TABLE_BENCHMARKS = {1: "kdv-soliton", 2: "kdv-two-soliton", 3: "nlh-wave", 4: "nlh-barenblatt"}


def table_scenarios(table: int, rs: Sequence[int] = (1, 2, 4, 10)) -> list[ScenarioConfig]:
    """Scenarios of one comparison table, leaving out the brute-force row."""
    bench = TABLE_BENCHMARKS[table]
    families = ("EC", "MC") if get_benchmark(bench).equation == "KdV" else ("CS",)
    out = []
    for s in families:
        for mode in ("adaptive", "averaged"):
            out += [ScenarioConfig(bench, s, mode, r=r, name=f"t{table}-{s}-{mode}-r{r}") for r in rs]
    for s in families:
        out.append(ScenarioConfig(bench, s, "fixed", name=f"t{table}-{s}-zero"))
    if families[0] == "EC":
        out += [ScenarioConfig(bench, s, "fixed", name=f"t{table}-{s}") for s in ("MS", "NB")]
    return out


def run_table(table: int, out_dir, rs: Sequence[int] = (1, 2, 4, 10)) -> list[ResultRecord]:
    rows = []
    for cfg in table_scenarios(table, rs):
        log.info("table %d: %s", table, cfg.scenario_id)
        rows.append(run_scenario(cfg))
    write_table(rows, Path(out_dir) / f"table{table}.csv")
    return rows


def run_figures(benchmark: str, out_dir, rs: Sequence[int] = (1, 2, 4, 10)) -> list[ResultRecord]:
    """Parameter sequences of both algorithms for each r, plus pointwise errors of each final state."""
    scheme = "EC" if get_benchmark(benchmark).equation == "KdV" else "CS"
    recs = []
    for mode in ("adaptive", "averaged"):
        for r in rs:
            cfg = ScenarioConfig(benchmark, scheme, mode, r=r, name=f"{benchmark}-{mode}-r{r}")
            rec = run_scenario(cfg)
            write_chi_sequence(rec, Path(out_dir) / f"{cfg.scenario_id}_chi.csv")
            write_pointwise(rec, Path(out_dir) / f"{cfg.scenario_id}_pointwise.csv")
            recs.append(rec)
    return recs
