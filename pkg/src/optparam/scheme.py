"""Common surface of the single-step schemes used by the optimizer."""
from __future__ import annotations

import numpy as np

from .grid import Grid1D
from .linalg import DEFAULT_NEWTON, NewtonConfig


def param(chi, k: int):
    """Component k of a parameter vector, or a (B, 1) column for a batch of them."""
    chi = np.asarray(chi, dtype=float)
    return chi[:, k : k + 1] if chi.ndim == 2 else float(chi[k])


class NotPreserved(float):
    """Conservation error of a law the scheme does not preserve by construction.

    Behaves as the measured float but lets reports flag the value.
    """

    preserved = False


class Scheme:
    """A parametric single-step method u_{n+1} = Phi(dt, u_n, chi).

    Subclasses provide ``step``, ``rhs`` (the semidiscrete operator A),
    ``dtphi`` (analytic d/d(dt) of the flow) for parametric families, and the
    discrete densities/fluxes of the conservation laws. ``step``, ``dtphi``
    and ``rhs`` also accept a (B, K) batch of parameter vectors, returning
    (B, n) fields; this lets the optimizer evaluate several candidates at once.
    """

    name = "scheme"
    n_params = 0
    preserved: tuple[int, ...] = ()

    def __init__(self, grid: Grid1D, newton: NewtonConfig = DEFAULT_NEWTON, box_scale: float = 1.0):
        self.grid = grid
        self.newton = newton
        self.box_scale = box_scale

    def __repr__(self):
        return f"{type(self).__name__}(M={self.grid.M}, boundary={self.grid.boundary.kind})"

    def on_grid(self, grid: Grid1D) -> "Scheme":
        return type(self)(grid, self.newton, self.box_scale)

    def box(self, dt: float) -> tuple[np.ndarray, np.ndarray]:
        """Search box Omega = [-C dt^2, C dt^2]^K."""
        half = self.box_scale * dt * dt
        return np.full(self.n_params, -half), np.full(self.n_params, half)

    def step(self, u, dt, chi, t=0.0, guess=None):
        """u_{n+1} = Phi(dt, u_n, chi). ``guess`` overrides the Newton start u_n."""
        raise NotImplementedError

    def dtphi(self, u, v, dt, chi, t=0.0):
        raise NotImplementedError(f"{self.name} has no analytic time derivative")

    def rhs(self, u, t=0.0):
        raise NotImplementedError

    def residual(self, u, v, dt, chi, t=0.0):
        """The scheme equations evaluated at (u_n, u_{n+1}); zero at a converged step."""
        raise NotImplementedError

    def densities(self, u, chi, t=0.0) -> dict[int, np.ndarray]:
        raise NotImplementedError

    def fluxes(self, u, v, dt, chi, t=0.0) -> dict[int, np.ndarray]:
        raise NotImplementedError
