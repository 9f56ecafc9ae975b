"""Linearly implicit CS(lambda) schemes for u_t = (u^2/2)_xx with Dirichlet data.

Fields hold the M interior nodes. Boundary values enter every stencil through
the ghost entries phi_L(t) and phi_R(t); ``Boundary.zero()`` is the special
case phi_L = phi_R = 0.
"""
from __future__ import annotations

import numpy as np

from .grid import Boundary, Grid1D, GridError
from .linalg import DEFAULT_NEWTON, NewtonConfig, StructuredMatrix, solve_linear
from .scheme import Scheme, param


def _check_grid(grid: Grid1D):
    if grid.boundary.kind not in ("dirichlet", "zero"):
        raise GridError("the nonlinear heat schemes need Dirichlet or zero boundaries")


def _with_ghosts(u, left, right):
    side = np.shape(u)[:-1] + (1,)
    return np.concatenate((np.full(side, left), u, np.full(side, right)), axis=-1)


def d2_hat(u, grid: Grid1D) -> np.ndarray:
    """Centred second difference with homogeneous boundary values."""
    e = _with_ghosts(u, 0.0, 0.0)
    return (e[..., 2:] - 2 * e[..., 1:-1] + e[..., :-2]) / grid.dx**2


def d2_full(u, grid: Grid1D, ghosts: tuple[float, float]) -> np.ndarray:
    e = _with_ghosts(u, *ghosts)
    return (e[..., 2:] - 2 * e[..., 1:-1] + e[..., :-2]) / grid.dx**2


def _edge(grid: Grid1D, left: float, right: float) -> np.ndarray:
    """left * e_1 + right * e_M."""
    out = np.zeros(grid.n)
    out[0] += left
    out[-1] += right
    return out


def nlh_rhs(u, t: float, grid: Grid1D) -> np.ndarray:
    """A(u, t) = (D2_hat u^2 + (phi_L^2 e_1 + phi_R^2 e_M) / dx^2) / 2."""
    _check_grid(grid)
    u = grid.check(u)
    pl, pr = grid.boundary.values(t)
    return 0.5 * (d2_hat(u * u, grid) + _edge(grid, pl * pl, pr * pr) / grid.dx**2)


def cs_matrix(u, dt: float, lam: float, grid: Grid1D) -> StructuredMatrix:
    """[dt J] = I + lam D2_hat - (dt/2) D2_hat diag(u_n), tridiagonal."""
    h2 = grid.dx**2
    n = grid.n
    e = _with_ghosts(u, 0.0, 0.0)
    # entries outside the matrix (first of band -1, last of band +1) are ignored
    up = lam / h2 - 0.5 * dt * e[..., 2:] / h2
    lo = lam / h2 - 0.5 * dt * e[..., :-2] / h2
    diag = 1.0 - 2 * lam / h2 + dt * u / h2
    return StructuredMatrix(n, {-1: lo, 0: diag, 1: up})


def cs_step(u, t: float, dt: float, lam: float, grid: Grid1D) -> np.ndarray:
    """One step of D_dt(u_n + lam D2 u_n) = D2(u_n * u_{n+1}) / 2.

    The scheme is linear in u_{n+1}, so this is a single tridiagonal solve.
    """
    _check_grid(grid)
    u = grid.check(u)
    h2 = grid.dx**2
    l0, r0 = grid.boundary.values(t)
    l1, r1 = grid.boundary.values(t + dt)
    rhs = (
        u
        + lam * d2_hat(u, grid)
        - lam * _edge(grid, l1 - l0, r1 - r0) / h2
        + 0.5 * dt * _edge(grid, l1 * l0, r1 * r0) / h2
    )
    return solve_linear(cs_matrix(u, dt, lam, grid), rhs)


def cs_dtphi(u, v, t: float, dt: float, lam: float, grid: Grid1D) -> np.ndarray:
    """d/d(dt) of the CS step at fixed t_n, with t_{n+1} = t_n + dt."""
    _check_grid(grid)
    h2 = grid.dx**2
    l0, r0 = grid.boundary.values(t)
    l1, r1 = grid.boundary.values(t + dt)
    dl1, dr1 = grid.boundary.derivatives(t + dt)
    rhs = (
        0.5 * d2_hat(u * v, grid)
        - lam * _edge(grid, dl1, dr1) / h2
        + _edge(grid, (l1 + dt * dl1) * l0, (r1 + dt * dr1) * r0) / (2 * h2)
    )
    return solve_linear(cs_matrix(u, dt, lam, grid), rhs)


def cs_residual(u, v, t: float, dt: float, lam, grid: Grid1D) -> np.ndarray:
    """D_dt(u + lam D2 u) - D2(u_n u_{n+1}) / 2 with boundary values; affine in lam."""
    l0, r0 = grid.boundary.values(t)
    l1, r1 = grid.boundary.values(t + dt)
    du = (v - u) / dt
    dd = (d2_full(v, grid, (l1, r1)) - d2_full(u, grid, (l0, r0))) / dt
    return du + lam * dd - 0.5 * d2_full(u * v, grid, (l0 * l1, r0 * r1))


def nlh_mass_flux(u, v, t: float, dt: float, lam: float, grid: Grid1D) -> np.ndarray:
    """F1 at the half-nodes m = 1..M+1 (length M+1).

    F1 = -D_dx S^{-1}(u_n u_{n+1} / 2 - lam D_dt u_n), so that
    D_dx F1 + D_dt u_n = 0 holds at every interior node.
    """
    l0, r0 = grid.boundary.values(t)
    l1, r1 = grid.boundary.values(t + dt)
    g = 0.5 * _with_ghosts(u * v, l0 * l1, r0 * r1) - lam * (_with_ghosts(v, l1, r1) - _with_ghosts(u, l0, r0)) / dt
    return -np.diff(g) / grid.dx


def nlh_moment_flux(u, v, t: float, dt: float, grid: Grid1D) -> np.ndarray:
    """F2 = S^{-1}(mu f - (mu x) D f) with f = u_n u_{n+1} / 2, at m = 1..M+1."""
    l0, r0 = grid.boundary.values(t)
    l1, r1 = grid.boundary.values(t + dt)
    f = 0.5 * _with_ghosts(u * v, l0 * l1, r0 * r1)
    xh = 0.5 * (grid.x_full[1:] + grid.x_full[:-1])
    return 0.5 * (f[1:] + f[:-1]) - xh * np.diff(f) / grid.dx


def nlh_moment_density(u, t: float, lam: float, grid: Grid1D) -> np.ndarray:
    return grid.x * (u + lam * d2_full(u, grid, grid.boundary.values(t)))


class CS(Scheme):
    """CS(lambda): linearly implicit, conserves mass and the first moment."""

    name = "CS"
    n_params = 1
    preserved = (1, 2)

    def __init__(self, grid: Grid1D, newton: NewtonConfig = DEFAULT_NEWTON, box_scale: float = 1.0):
        _check_grid(grid)
        super().__init__(grid, newton, box_scale)

    def step(self, u, dt, chi, t=0.0, guess=None):
        # linear in u_{n+1}: no iteration, so the guess is unused
        return cs_step(u, t, dt, param(chi, 0), self.grid)

    def dtphi(self, u, v, dt, chi, t=0.0):
        return cs_dtphi(u, v, t, dt, param(chi, 0), self.grid)

    def rhs(self, u, t=0.0):
        return nlh_rhs(u, t, self.grid)

    def residual(self, u, v, dt, chi, t=0.0):
        return cs_residual(u, v, t, dt, param(chi, 0), self.grid)

    def densities(self, u, chi, t=0.0):
        return {1: np.array(u, dtype=float), 2: nlh_moment_density(u, t, param(chi, 0), self.grid)}

    def fluxes(self, u, v, dt, chi, t=0.0):
        lam = param(chi, 0)
        return {
            1: nlh_mass_flux(u, v, t, dt, lam, self.grid),
            2: nlh_moment_flux(u, v, t, dt, self.grid),
        }


__all__ = [
    "Boundary",
    "CS",
    "cs_dtphi",
    "cs_matrix",
    "cs_residual",
    "cs_step",
    "d2_full",
    "d2_hat",
    "nlh_mass_flux",
    "nlh_moment_density",
    "nlh_moment_flux",
    "nlh_rhs",
]
