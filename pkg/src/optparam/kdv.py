"""Conservative finite-difference schemes for u_t + (u^2/2 + u_xx)_x = 0.

EC(alpha) conserves mass and energy, MC(beta, gamma) conserves mass and
momentum; the multisymplectic and narrow box schemes are the parameter-free
baselines. All four are implicit and solved by Newton's method with analytic
banded Jacobians (cyclic on periodic grids).
"""
from __future__ import annotations

import numpy as np

from .grid import Grid1D, GridError, central_diff, pad
from .linalg import DEFAULT_NEWTON, NewtonConfig, StructuredMatrix, newton_solve, solve_linear
from .scheme import Scheme, param


def _check_grid(grid: Grid1D):
    if grid.boundary.kind not in ("periodic", "zero"):
        raise GridError("KdV schemes support periodic or zero boundaries")


def _guess(u, *params):
    shape = np.broadcast_shapes(np.shape(u), *(np.shape(p) for p in params))
    return np.broadcast_to(u, shape).copy()


class _Shifts:
    """Shifted views of a field padded once to width w."""

    __slots__ = ("e", "w", "n")

    def __init__(self, u, grid: Grid1D, w: int = 3):
        self.e = pad(u, grid, w)
        self.w = w
        self.n = grid.n

    def __call__(self, k: int) -> np.ndarray:
        return self.e[..., self.w + k : self.w + k + self.n]


def D1(u, grid):
    return central_diff(u, 1, grid)


def D2(u, grid):
    return central_diff(u, 2, grid)


def D3(u, grid):
    return central_diff(u, 3, grid)


def D4(u, grid):
    return central_diff(u, 4, grid)


def S(u, k, grid):
    return _Shifts(u, grid)(k)


def Dx(u, grid):
    """Forward difference D_dx."""
    s = _Shifts(u, grid, 1)
    return (s(1) - s(0)) / grid.dx


def mux(u, grid):
    s = _Shifts(u, grid, 1)
    return 0.5 * (s(1) + s(0))


def kdv_rhs(u, grid: Grid1D) -> np.ndarray:
    """Semidiscrete operator A(u) = -D_1(u^2/2 + D_2 u)."""
    _check_grid(grid)
    u = grid.check(u)
    h = grid.dx
    n = grid.n
    e = pad(u, grid, 2)
    c = e[..., 1 : n + 3]
    f = 0.5 * c * c + (e[..., 2 : n + 4] - 2 * c + e[..., : n + 2]) / (h * h)
    return -(f[..., 2:] - f[..., :-2]) / (2 * h)


def psi(u, v, alpha: float, dt: float, grid: Grid1D) -> np.ndarray:
    """The EC flux density psi(u_n, u_{n+1}, alpha)."""
    return (v * v + u * u + u * v) / 6.0 + D2(0.5 * (u + v), grid) + alpha * D1((v - u) / dt, grid)


# ---------------------------------------------------------------- EC(alpha)


def ec_residual(u, v, dt, alpha, grid):
    # single padded pass: psi is needed at m-1..m+1, hence fields at m-2..m+2
    h = grid.dx
    n = grid.n
    w = 0.5 * (u + v)
    dv = (v - u) / dt
    w, dv = np.broadcast_arrays(w, dv)
    e = pad(np.stack((w, dv, (v * v + u * u + u * v) / 6.0)), grid, 2)
    ew, ed, eq = e[0], e[1], e[2]
    ps = (
        eq[..., 1 : n + 3]
        + (ew[..., 2 : n + 4] - 2 * ew[..., 1 : n + 3] + ew[..., : n + 2]) / (h * h)
        + alpha * (ed[..., 2 : n + 4] - ed[..., : n + 2]) / (2 * h)
    )
    return dv + (ps[..., 2:] - ps[..., :-2]) / (2 * h)


def ec_jacobian(u, v, dt, alpha, grid) -> StructuredMatrix:
    """d/dv of the EC residual: I/dt + D_1 diag((2v+u)/6) + D_3/2 + (alpha/dt) D_1^2."""
    h = grid.dx
    n = grid.n
    d = _Shifts((2 * v + u) / 6.0, grid, 1)
    shape = d.e.shape[:-1] + (n,)
    c3 = 1.0 / (2 * h**3)
    c11 = np.broadcast_to(alpha / dt / (4 * h * h), shape[:-1] + (1,) if shape[:-1] else ())
    outer = np.broadcast_to(c11, shape)
    bands = {
        2: outer + 0.5 * c3,
        1: d(1) / (2 * h) - c3,
        0: np.broadcast_to(1.0 / dt - 2 * c11, shape),
        -1: -d(-1) / (2 * h) + c3,
        -2: outer - 0.5 * c3,
    }
    return StructuredMatrix(n, bands, cyclic=grid.boundary.is_periodic)


def ec_step(u, dt, alpha, grid, newton: NewtonConfig = DEFAULT_NEWTON, guess=None) -> np.ndarray:
    _check_grid(grid)
    u = grid.check(u)
    return newton_solve(
        lambda v: ec_residual(u, v, dt, alpha, grid),
        lambda v: ec_jacobian(u, v, dt, alpha, grid),
        _guess(u if guess is None else guess, alpha),
        newton,
    )


def ec_dtphi(u, v, alpha, dt, grid) -> np.ndarray:
    """Time derivative of the EC flow: -[dt J]^{-1} D_1 psi(u_n, u_{n+1}, 0)."""
    J = ec_jacobian(u, v, dt, alpha, grid)
    # D_1 psi(u, v, 0) is the EC residual at alpha = 0 minus its D_dt part
    return solve_linear(J.scaled(dt), (v - u) / dt - ec_residual(u, v, dt, 0.0, grid))


# ------------------------------------------------------------ MC(beta, gamma)


def _mc_quad_dx(w, grid):
    """D_dx of (1/6)((S^{-1}w)^2 + w^2 + (S^{-1}w) w)."""
    s = _Shifts(w, grid, 1)
    wp, w0, wm = s(1), s(0), s(-1)
    return (wp * wp - wm * wm + w0 * (wp - wm)) / (6 * grid.dx)


def mc_residual(u, v, dt, beta, gamma, grid):
    w = 0.5 * (u + v)
    dv = (v - u) / dt
    return dv + _mc_quad_dx(w, grid) + D3(w, grid) + beta * D2(dv, grid) + gamma * D4(dv, grid)


def mc_jacobian(u, v, dt, beta, gamma, grid) -> StructuredMatrix:
    h = grid.dx
    n = grid.n
    s = _Shifts(0.5 * (u + v), grid, 1)
    wp, w0, wm = s(1), s(0), s(-1)
    one = np.ones(n)
    c3 = 1.0 / (2 * h**3)
    b2 = beta / dt / h**2
    g4 = gamma / dt / h**4
    bands = {
        2: one * (0.5 * c3 + g4),
        1: 0.5 * (2 * wp + w0) / (6 * h) - c3 * one + b2 - 4 * g4,
        0: 0.5 * (wp - wm) / (6 * h) + one * (1.0 / dt - 2 * b2 + 6 * g4),
        -1: -0.5 * (2 * wm + w0) / (6 * h) + c3 * one + b2 - 4 * g4,
        -2: one * (-0.5 * c3 + g4),
    }
    return StructuredMatrix(n, bands, cyclic=grid.boundary.is_periodic)


def mc_step(u, dt, beta, gamma, grid, newton: NewtonConfig = DEFAULT_NEWTON, guess=None) -> np.ndarray:
    _check_grid(grid)
    u = grid.check(u)
    return newton_solve(
        lambda v: mc_residual(u, v, dt, beta, gamma, grid),
        lambda v: mc_jacobian(u, v, dt, beta, gamma, grid),
        _guess(u if guess is None else guess, beta, gamma),
        newton,
    )


def mc_dtphi(u, v, beta, gamma, dt, grid, exact: bool = False) -> np.ndarray:
    """Time derivative of the MC flow.

    The default right-hand side is A(mu_t u_n), the semidiscrete operator at
    the midpoint state. That is an O(dx^2) approximation of the scheme's own
    flux; ``exact=True`` differentiates the discrete equations instead.
    """
    J = mc_jacobian(u, v, dt, beta, gamma, grid)
    dtJ = J.scaled(dt)
    w = 0.5 * (u + v)
    if exact:
        rhs = -(_mc_quad_dx(w, grid) + D3(w, grid))
    else:
        rhs = kdv_rhs(w, grid)
    return solve_linear(dtJ, rhs)


# ------------------------------------------------------------ baselines


def _third_diff(s):
    # (w_{m+1} - 3 w_m + 3 w_{m-1} - w_{m-2})
    return s(1) - 3 * s(0) + 3 * s(-1) - s(-2)


def multisymplectic_residual(u, v, dt, grid):
    h = grid.dx
    s = _Shifts(0.5 * (u + v), grid, 2)
    p = lambda k: 0.5 * (s(k) + s(k + 1))  # noqa: E731
    z = _Shifts(v - u, grid, 2)
    mass = (z(-2) + 3 * z(-1) + 3 * z(0) + z(1)) / (8 * dt)
    return 0.25 * (p(0) ** 2 - p(-2) ** 2) / h + _third_diff(s) / h**3 + mass


def multisymplectic_jacobian(u, v, dt, grid) -> StructuredMatrix:
    h = grid.dx
    n = grid.n
    s = _Shifts(0.5 * (u + v), grid, 2)
    p0 = 0.5 * (s(0) + s(1))
    pm2 = 0.5 * (s(-2) + s(-1))
    one = np.ones(n)
    c = 1.0 / h**3
    bands = {
        1: 0.5 * (p0 / (4 * h) + c) + one / (8 * dt),
        0: 0.5 * (p0 / (4 * h) - 3 * c) + 3 * one / (8 * dt),
        -1: 0.5 * (-pm2 / (4 * h) + 3 * c) + 3 * one / (8 * dt),
        -2: 0.5 * (-pm2 / (4 * h) - c) + one / (8 * dt),
    }
    return StructuredMatrix(n, bands, cyclic=grid.boundary.is_periodic)


def _recentre(F, grid):
    # equation m+1 is placed in row m so the truncated band has zero winding
    # number; without this the corner-correction solve is ill-conditioned
    return np.roll(F, -1, axis=-1) if grid.boundary.is_periodic else F


def _recentre_jacobian(J: StructuredMatrix) -> StructuredMatrix:
    if not J.cyclic:
        return J
    return StructuredMatrix(J.n, {k + 1: np.roll(c, -1, axis=-1) for k, c in J.bands.items()}, True)


def multisymplectic_step(u, dt, grid, newton: NewtonConfig = DEFAULT_NEWTON) -> np.ndarray:
    _check_grid(grid)
    u = grid.check(u)
    return newton_solve(
        lambda v: _recentre(multisymplectic_residual(u, v, dt, grid), grid),
        lambda v: _recentre_jacobian(multisymplectic_jacobian(u, v, dt, grid)),
        u,
        newton,
    )


def narrowbox_residual(u, v, dt, grid):
    h = grid.dx
    s = _Shifts(0.5 * (u + v), grid, 2)
    z = _Shifts(v - u, grid, 1)
    return 0.5 * (s(0) ** 2 - s(-1) ** 2) / h + _third_diff(s) / h**3 + (z(-1) + z(0)) / (2 * dt)


def narrowbox_jacobian(u, v, dt, grid) -> StructuredMatrix:
    h = grid.dx
    n = grid.n
    s = _Shifts(0.5 * (u + v), grid, 1)
    one = np.ones(n)
    c = 1.0 / h**3
    bands = {
        1: 0.5 * c * one,
        0: 0.5 * (s(0) / h - 3 * c) + one / (2 * dt),
        -1: 0.5 * (-s(-1) / h + 3 * c) + one / (2 * dt),
        -2: -0.5 * c * one,
    }
    return StructuredMatrix(n, bands, cyclic=grid.boundary.is_periodic)


def narrowbox_step(u, dt, grid, newton: NewtonConfig = DEFAULT_NEWTON) -> np.ndarray:
    _check_grid(grid)
    u = grid.check(u)
    return newton_solve(
        lambda v: _recentre(narrowbox_residual(u, v, dt, grid), grid),
        lambda v: _recentre_jacobian(narrowbox_jacobian(u, v, dt, grid)),
        u,
        newton,
    )


# ------------------------------------------------ densities and fluxes


def _dt(f, u, v, dt):
    return (f(v) - f(u)) / dt


def energy_density(u, grid):
    return u**3 / 3.0 + u * D2(u, grid)


def momentum_density(u, beta, gamma, grid):
    return 0.5 * u * (u + D2(beta * u + gamma * D2(u, grid), grid))


def ec_energy_flux(u, v, dt, alpha, grid):
    ps = psi(u, v, alpha, dt, grid)
    du = (v - u) / dt
    w = 0.5 * (u + v)
    inner = Dx(w, grid) * mux(du, grid) - mux(w, grid) * Dx(du, grid)
    return ps * S(ps, -1, grid) + alpha * du * S(du, -1, grid) + S(inner, -1, grid)


def mc_mass_flux(u, v, dt, beta, gamma, grid):
    w = 0.5 * (u + v)
    wm = S(w, -1, grid)
    du = (v - u) / dt
    return (
        (wm * wm + w * w + wm * w) / 6.0
        + S(Dx(Dx(mux(w, grid), grid), grid), -2, grid)
        + S(Dx(beta * du + gamma * D2(du, grid), grid), -1, grid)
    )


def mc_rho(u, v, dt, grid):
    w = 0.5 * (u + v)
    du = (v - u) / dt
    g = lambda z: mux(z, grid) * Dx(z, grid)  # noqa: E731
    return S(mux(w, grid) * Dx(du, grid) - 0.5 * _dt(g, u, v, dt), -1, grid)


def _dx3_sm2(z, grid):
    return S(Dx(Dx(Dx(z, grid), grid), grid), -2, grid)


def mc_sigma(u, v, dt, grid):
    w = 0.5 * (u + v)
    du = (v - u) / dt
    first = w * _dx3_sm2(du, grid) - S(Dx(w, grid) * Dx(Dx(du, grid), grid), -1, grid)
    g = lambda z: S(Dx(z, grid) * Dx(Dx(z, grid), grid), -1, grid) - z * _dx3_sm2(z, grid)  # noqa: E731
    return first + 0.5 * _dt(g, u, v, dt)


def mc_momentum_flux(u, v, dt, beta, gamma, grid):
    """Momentum flux of MC(beta, gamma), obtained by summation by parts of
    mu_t u_n times the scheme; D_dx of it plus D_dt of the momentum density
    vanishes to round-off on MC solutions."""
    h = grid.dx
    s = _Shifts(0.5 * (u + v), grid, 2)
    w, wm, wmm, wp = s(0), s(-1), s(-2), s(1)
    out = w * wm * (wm + w) / 6.0 + (wm * wp + wmm * w - 2 * wm * w) / (2 * h * h)
    if np.any(beta):
        out = out + beta * mc_rho(u, v, dt, grid)
    if np.any(gamma):
        out = out + gamma * mc_sigma(u, v, dt, grid)
    return out


def box_momentum_density(u, grid):
    m = S(mux(u, grid), -1, grid)
    return 0.5 * m * m


def box_energy_density(u, grid):
    m = S(mux(u, grid), -1, grid)
    return m**3 / 3.0 + m * D2(m, grid)


# ------------------------------------------------------------ scheme objects


class EC(Scheme):
    """EC(alpha): mass- and energy-conserving family."""

    name = "EC"
    n_params = 1
    preserved = (1, 3)

    def step(self, u, dt, chi, t=0.0, guess=None):
        return ec_step(u, dt, param(chi, 0), self.grid, self.newton, guess)

    def dtphi(self, u, v, dt, chi, t=0.0):
        return ec_dtphi(u, v, param(chi, 0), dt, self.grid)

    def rhs(self, u, t=0.0):
        return kdv_rhs(u, self.grid)

    def residual(self, u, v, dt, chi, t=0.0):
        return ec_residual(u, v, dt, param(chi, 0), self.grid)

    def densities(self, u, chi, t=0.0):
        g = self.grid
        return {1: u.copy(), 2: momentum_density(u, 0.0, 0.0, g), 3: energy_density(u, g)}

    def fluxes(self, u, v, dt, chi, t=0.0):
        a = param(chi, 0)
        g = self.grid
        ps = psi(u, v, a, dt, g)
        return {
            1: 0.5 * (S(ps, -1, g) + ps),
            2: mc_momentum_flux(u, v, dt, 0.0, 0.0, g),
            3: ec_energy_flux(u, v, dt, a, g),
        }


class MC(Scheme):
    """MC(beta, gamma): mass- and momentum-conserving family."""

    name = "MC"
    n_params = 2
    preserved = (1, 2)

    def __init__(self, grid, newton=DEFAULT_NEWTON, box_scale=1.0, exact_dtphi=False):
        super().__init__(grid, newton, box_scale)
        self.exact_dtphi = exact_dtphi

    def on_grid(self, grid):
        return type(self)(grid, self.newton, self.box_scale, self.exact_dtphi)

    def step(self, u, dt, chi, t=0.0, guess=None):
        return mc_step(u, dt, param(chi, 0), param(chi, 1), self.grid, self.newton, guess)

    def dtphi(self, u, v, dt, chi, t=0.0):
        return mc_dtphi(u, v, param(chi, 0), param(chi, 1), dt, self.grid, self.exact_dtphi)

    def rhs(self, u, t=0.0):
        return kdv_rhs(u, self.grid)

    def residual(self, u, v, dt, chi, t=0.0):
        return mc_residual(u, v, dt, param(chi, 0), param(chi, 1), self.grid)

    def densities(self, u, chi, t=0.0):
        g = self.grid
        b, c = param(chi, 0), param(chi, 1)
        return {1: u.copy(), 2: momentum_density(u, b, c, g), 3: energy_density(u, g)}

    def fluxes(self, u, v, dt, chi, t=0.0):
        g = self.grid
        b, c = param(chi, 0), param(chi, 1)
        return {
            1: mc_mass_flux(u, v, dt, b, c, g),
            2: mc_momentum_flux(u, v, dt, b, c, g),
            3: ec_energy_flux(u, v, dt, 0.0, g),
        }


class Multisymplectic(Scheme):
    name = "Multisymplectic"
    n_params = 0
    preserved = (1,)

    def step(self, u, dt, chi=(), t=0.0, guess=None):
        return multisymplectic_step(u, dt, self.grid, self.newton)

    def rhs(self, u, t=0.0):
        return kdv_rhs(u, self.grid)

    def residual(self, u, v, dt, chi=(), t=0.0):
        return multisymplectic_residual(u, v, dt, self.grid)

    def densities(self, u, chi=(), t=0.0):
        g = self.grid
        z = _Shifts(u, g, 2)
        mass = (z(-2) + 3 * z(-1) + 3 * z(0) + z(1)) / 8.0
        return {1: mass, 2: box_momentum_density(u, g), 3: box_energy_density(u, g)}

    def fluxes(self, u, v, dt, chi=(), t=0.0):
        g = self.grid
        s = _Shifts(0.5 * (u + v), g, 2)
        p = lambda k: 0.5 * (s(k) + s(k + 1))  # noqa: E731
        f = 0.25 * (p(-2) ** 2 + p(-1) ** 2) + (s(0) - 2 * s(-1) + s(-2)) / g.dx**2
        return {1: f}


class NarrowBox(Scheme):
    name = "NarrowBox"
    n_params = 0
    preserved = (1,)

    def step(self, u, dt, chi=(), t=0.0, guess=None):
        return narrowbox_step(u, dt, self.grid, self.newton)

    def rhs(self, u, t=0.0):
        return kdv_rhs(u, self.grid)

    def residual(self, u, v, dt, chi=(), t=0.0):
        return narrowbox_residual(u, v, dt, self.grid)

    def densities(self, u, chi=(), t=0.0):
        g = self.grid
        return {1: S(mux(u, g), -1, g), 2: box_momentum_density(u, g), 3: box_energy_density(u, g)}

    def fluxes(self, u, v, dt, chi=(), t=0.0):
        g = self.grid
        s = _Shifts(0.5 * (u + v), g, 2)
        f = 0.5 * s(-1) ** 2 + (s(0) - 2 * s(-1) + s(-2)) / g.dx**2
        return {1: f}
