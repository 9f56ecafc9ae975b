"""Gauss-Newton minimisation of the squared defect norm, and the two drivers.

``algorithm1_adaptive`` re-optimises the parameters at every step on a coarse
projection of the current state and advances on the full grid.
``algorithm2_fixed`` runs the whole optimisation on the coarse grid, averages
the optimal parameters and re-runs the full grid with that fixed value.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .defect import ParamVector, defect, defect_batch, fd_columns, fd_points, fd_step
from .grid import Grid1D, divisors, project_coarse
from .linalg import NonConvergence, SingularJacobian
from .scheme import Scheme

log = logging.getLogger(__name__)

HESSIAN_COND_MAX = 1e12


class SingularHessian(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings shared by both drivers.

    ``initial_radius`` is a multiple of dt^2 (the default 0.1 gives dt^2/10).
    ``use_trust_region`` applies to the first time step only; later steps are
    warm started and use the plain Gauss-Newton iteration.
    """

    tol: float = 1e-8
    max_iter: int = 20
    r: int = 1
    initial_radius: float = 0.1
    use_trust_region: bool = True
    fd_step: Optional[float] = None
    grad_tol: float = 0.0

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.r < 1:
            raise ValueError("r must be at least 1")
        if self.initial_radius <= 0:
            raise ValueError("initial_radius must be positive")


@dataclass
class StepOptResult:
    chi_star: ParamVector
    iterations: int
    final_defect_norm: float
    clamped: bool
    converged: bool = True
    radius: float = 0.0


@dataclass
class RunRecord:
    trajectory: list
    chi_sequence: list = field(default_factory=list)
    chi_bar: Optional[np.ndarray] = None
    fixed_chi: Optional[np.ndarray] = None
    defect_norms: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    clamp_count: int = 0
    nonconverged: int = 0
    wall_time: float = 0.0
    optimizer_time: float = 0.0
    dt: float = 0.0
    t0: float = 0.0
    failed: Optional[str] = None

    @property
    def N(self) -> int:
        return len(self.trajectory) - 1

    def law_chi(self, n_params: int) -> np.ndarray:
        """Parameters used when evaluating conservation laws of this run.

        Fixed-parameter runs use their own parameters; adaptive runs use zero.
        """
        if self.fixed_chi is not None:
            return np.asarray(self.fixed_chi, dtype=float)
        return np.zeros(n_params)


# ------------------------------------------------------------ GN primitives


def _gn_direction(R, J):
    g = J.T @ R
    H = J.T @ J
    if not np.all(np.isfinite(H)) or np.linalg.cond(H) > HESSIAN_COND_MAX:
        raise SingularHessian("Gauss-Newton Hessian is singular")
    return -np.linalg.solve(H, g), g, H


def gn_step(R, J, chi: ParamVector, fallback_radius: float | None = None) -> ParamVector:
    """chi - H^{-1} g with g = J^T R and H = J^T J, clamped to the box.

    A singular H falls back to a steepest-descent step of length
    ``fallback_radius`` (default: a tenth of the box half-width).
    """
    R = np.asarray(R, dtype=float)
    J = np.asarray(J, dtype=float).reshape(R.size, -1)
    try:
        p, _, _ = _gn_direction(R, J)
    except SingularHessian:
        g = J.T @ R
        ng = np.linalg.norm(g)
        if ng == 0:
            return chi.with_values(chi.values)
        if fallback_radius is None:
            fallback_radius = 0.1 * float(np.max(chi.upper - chi.lower)) / 2
        p = -g / ng * fallback_radius
    return chi.with_values(chi.values + p)


def _dogleg(p_gn, g, H, radius):
    if np.linalg.norm(p_gn) <= radius:
        return p_gn, False
    gHg = float(g @ H @ g)
    if gHg <= 0:
        return -g / np.linalg.norm(g) * radius, True
    p_c = -(g @ g) / gHg * g
    if np.linalg.norm(p_c) >= radius:
        return p_c / np.linalg.norm(p_c) * radius, True
    d = p_gn - p_c
    a, b, c = d @ d, 2 * p_c @ d, p_c @ p_c - radius**2
    tau = (-b + np.sqrt(b * b - 4 * a * c)) / (2 * a)
    return p_c + tau * d, True


class _Objective:
    """Defect and FD Jacobian of one time step, on whatever grid ``scheme`` lives.

    The temporary steps are always recomputed, but each Newton solve starts
    from the step at the previous candidate rather than from u_n: candidates
    differ by O(dt^2), so this saves about half of the Newton iterations.
    """

    def __init__(self, scheme: Scheme, dt: float, u, t: float, h: float):
        self.scheme, self.dt, self.u, self.t, self.h = scheme, dt, u, t, h
        self.dx = scheme.grid.dx
        self.guess = None

    def _eval(self, chis):
        R, v = defect_batch(self.scheme, self.dt, self.u, chis, self.t, guess=self.guess, with_steps=True)
        self.guess = v[0]
        return R

    def residual(self, chi) -> np.ndarray:
        return self._eval(np.atleast_1d(chi)[None, :])[0]

    def jacobian(self, chi) -> np.ndarray:
        return fd_columns(self._eval(fd_points(chi, self.h)), self.h)

    def residual_and_jacobian(self, chi):
        chi = np.atleast_1d(chi)
        Rs = self._eval(np.vstack([chi[None, :], fd_points(chi, self.h)]))
        return Rs[0], fd_columns(Rs[1:], self.h)

    def value(self, R) -> float:
        return 0.5 * self.dx * float(R @ R)


def trust_region_solve(
    scheme: Scheme, dt: float, u, chi0: ParamVector, radius0: float, cfg: OptimizerConfig, t: float = 0.0
) -> StepOptResult:
    """Trust-region Gauss-Newton (dogleg) iteration on 0.5 ||R(chi)||^2."""
    obj = _Objective(scheme, dt, u, t, cfg.fd_step or fd_step(dt))
    chi = chi0
    radius = radius0
    R = obj.residual(chi.values)
    f = obj.value(R)
    clamped = chi.clamped
    converged = False
    k = 0
    while k < cfg.max_iter:
        k += 1
        J = obj.jacobian(chi.values)
        g = J.T @ R
        if not np.any(g) or np.linalg.norm(g) <= cfg.grad_tol:
            converged = True
            break
        H = J.T @ J
        try:
            if np.linalg.cond(H) > HESSIAN_COND_MAX:
                raise SingularHessian
            p_gn = -np.linalg.solve(H, g)
        except (SingularHessian, np.linalg.LinAlgError):
            p_gn = -g / np.linalg.norm(g) * radius
        p, hit = _dogleg(p_gn, g, H, radius)
        cand = chi.with_values(chi.values + p)
        p = cand.values - chi.values
        predicted = -(g @ p + 0.5 * p @ H @ p) * obj.dx
        try:
            Rc = obj.residual(cand.values)
            fc = obj.value(Rc)
            ratio = (f - fc) / predicted if predicted > 0 else 0.0
        except (NonConvergence, SingularJacobian, FloatingPointError):
            Rc, fc, ratio = None, np.inf, 0.0
        if not np.isfinite(ratio):
            ratio = 0.0
        if ratio < 0.1:
            radius *= 0.25
        elif ratio >= 0.75 and hit:
            radius *= 2.0
        if ratio >= 0.1:
            step = np.max(np.abs(p))
            chi, R, f = cand, Rc, fc
            clamped = clamped or cand.clamped
            if step < cfg.tol:
                converged = True
                break
        elif np.max(np.abs(p)) < cfg.tol:
            converged = True
            break
    return StepOptResult(chi, k, float(np.sqrt(2 * f)), clamped, converged, radius)


def optimize_step(
    scheme: Scheme, dt: float, u, chi_prev: ParamVector, cfg: OptimizerConfig, t: float = 0.0
) -> StepOptResult:
    """Warm-started plain Gauss-Newton iteration.

    Non-convergence is not fatal: the parameters with the smallest defect seen
    are returned with ``converged=False``.
    """
    obj = _Objective(scheme, dt, u, t, cfg.fd_step or fd_step(dt))
    chi = chi_prev
    fallback = cfg.initial_radius * dt * dt
    best = (np.inf, chi)
    clamped = False
    for k in range(1, cfg.max_iter + 1):
        R, J = obj.residual_and_jacobian(chi.values)
        nR = float(np.sqrt(2 * obj.value(R)))
        if nR < best[0]:
            best = (nR, chi)
        if cfg.grad_tol and np.linalg.norm(J.T @ R) <= cfg.grad_tol:
            return StepOptResult(chi, k, nR, clamped, True)
        new = gn_step(R, J, chi, fallback)
        clamped = clamped or new.clamped
        if np.max(np.abs(new.values - chi.values)) < cfg.tol:
            return StepOptResult(new, k, nR, clamped, True)
        chi = new
    R = obj.residual(chi.values)
    nR = float(np.sqrt(2 * obj.value(R)))
    if nR < best[0]:
        best = (nR, chi)
    log.warning("optimizer did not converge in %d iterations; using best parameters", cfg.max_iter)
    return StepOptResult(best[1], cfg.max_iter, best[0], clamped, False)


# ------------------------------------------------------------ drivers


def _coarse(scheme: Scheme, r: int) -> Scheme:
    return scheme if r == 1 else scheme.on_grid(scheme.grid.coarsen(r))


def _optimize(coarse: Scheme, dt, u_hat, chi, radius, cfg, n, t):
    if n == 0 and cfg.use_trust_region:
        return trust_region_solve(coarse, dt, u_hat, chi, radius, cfg, t)
    res = optimize_step(coarse, dt, u_hat, chi, cfg, t)
    res.radius = radius
    return res


def _record(rec: RunRecord, res: StepOptResult):
    rec.chi_sequence.append(res.chi_star.values.copy())
    rec.defect_norms.append(res.final_defect_norm)
    rec.iterations.append(res.iterations)
    rec.clamp_count += int(res.clamped)
    rec.nonconverged += int(not res.converged)


def algorithm1_adaptive(
    scheme: Scheme, u0, dt: float, N: int, cfg: OptimizerConfig, chi0=None, t0: float = 0.0
) -> RunRecord:
    """Optimise on the coarse projection of u_n, then step the full grid."""
    u = scheme.grid.check(u0).copy()
    rec = RunRecord([u], dt=dt, t0=t0)
    coarse = _coarse(scheme, cfg.r)
    chi = ParamVector.for_scheme(scheme, dt, chi0)
    radius = cfg.initial_radius * dt * dt
    start = time.perf_counter()
    try:
        for n in range(N):
            t = t0 + n * dt
            s = time.perf_counter()
            u_hat = project_coarse(u, scheme.grid, cfg.r)
            res = _optimize(coarse, dt, u_hat, chi, radius, cfg, n, t)
            rec.optimizer_time += time.perf_counter() - s
            _record(rec, res)
            chi, radius = res.chi_star, res.radius
            u = scheme.step(u, dt, chi.values, t)
            rec.trajectory.append(u)
    except (NonConvergence, SingularJacobian) as exc:
        rec.failed = f"step {len(rec.trajectory) - 1}: {exc}"
        log.error("adaptive run aborted at %s", rec.failed)
    rec.wall_time = time.perf_counter() - start
    return rec


def algorithm2_fixed(
    scheme: Scheme, u0, dt: float, N: int, cfg: OptimizerConfig, chi0=None, t0: float = 0.0
) -> RunRecord:
    """Coarse-grid optimisation pass, then a full-grid run with the mean parameters."""
    u0 = scheme.grid.check(u0)
    coarse = _coarse(scheme, cfg.r)
    chi = ParamVector.for_scheme(scheme, dt, chi0)
    radius = cfg.initial_radius * dt * dt
    rec = RunRecord([u0.copy()], dt=dt, t0=t0)
    start = time.perf_counter()
    u_hat = project_coarse(u0, scheme.grid, cfg.r)
    try:
        for n in range(N):
            t = t0 + n * dt
            res = _optimize(coarse, dt, u_hat, chi, radius, cfg, n, t)
            _record(rec, res)
            chi, radius = res.chi_star, res.radius
            u_hat = coarse.step(u_hat, dt, chi.values, t)
    except (NonConvergence, SingularJacobian) as exc:
        rec.failed = f"coarse step {len(rec.chi_sequence)}: {exc}"
        log.error("averaging pass aborted at %s", rec.failed)
        rec.wall_time = time.perf_counter() - start
        return rec
    rec.optimizer_time = time.perf_counter() - start
    rec.chi_bar = np.mean(rec.chi_sequence, axis=0) if N else chi.values.copy()
    fixed = run_fixed(scheme, u0, dt, N, rec.chi_bar, t0)
    rec.trajectory = fixed.trajectory
    rec.fixed_chi = rec.chi_bar
    rec.failed = fixed.failed
    rec.wall_time = time.perf_counter() - start
    return rec


def run_fixed(scheme: Scheme, u0, dt: float, N: int, chi=(), t0: float = 0.0) -> RunRecord:
    """Plain time stepping with constant parameters."""
    chi = np.atleast_1d(np.asarray(chi, dtype=float)) if scheme.n_params else np.zeros(0)
    u = scheme.grid.check(u0).copy()
    rec = RunRecord([u], fixed_chi=chi, dt=dt, t0=t0)
    start = time.perf_counter()
    try:
        for n in range(N):
            u = scheme.step(u, dt, chi, t0 + n * dt)
            rec.trajectory.append(u)
    except (NonConvergence, SingularJacobian) as exc:
        rec.failed = f"step {len(rec.trajectory) - 1}: {exc}"
    rec.wall_time = time.perf_counter() - start
    return rec


def suggest_r(grid: Grid1D, dt: float) -> int:
    """Largest divisor r of M+1 with r < dt/dx."""
    limit = dt / grid.dx
    return max(d for d in divisors(grid.M + 1) if d < limit or d == 1)
