"""Uniform 1-D grids and the shift/difference/average operator algebra.

Fields are plain float arrays. On a periodic grid a field holds the M+1 nodes
x_0..x_M (x_{M+1} is identified with x_0); on Dirichlet and zero-boundary grids
it holds the M interior nodes x_1..x_M and out-of-range entries are supplied as
ghost values.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

ScalarFn = Callable[[float], float]


class GridError(ValueError):
    """Raised on malformed grids, mismatched fields or missing ghost data."""


@dataclass(frozen=True)
class Boundary:
    """Boundary condition attached to a grid.

    ``kind`` is one of ``"periodic"``, ``"dirichlet"`` or ``"zero"``. Dirichlet
    boundaries carry the boundary functions and, optionally, their time
    derivatives (needed by the analytic time derivative of the NLH step).
    """

    kind: str
    left: Optional[ScalarFn] = field(default=None, compare=False)
    right: Optional[ScalarFn] = field(default=None, compare=False)
    dleft: Optional[ScalarFn] = field(default=None, compare=False)
    dright: Optional[ScalarFn] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("periodic", "dirichlet", "zero"):
            raise GridError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "dirichlet" and (self.left is None or self.right is None):
            raise GridError("Dirichlet boundary needs left and right functions")

    @classmethod
    def periodic(cls) -> "Boundary":
        return cls("periodic")

    @classmethod
    def zero(cls) -> "Boundary":
        return cls("zero")

    @classmethod
    def dirichlet(cls, left, right, dleft=None, dright=None) -> "Boundary":
        return cls("dirichlet", left, right, dleft, dright)

    @property
    def is_periodic(self) -> bool:
        return self.kind == "periodic"

    def values(self, t: float) -> tuple[float, float]:
        """Boundary values (phi_L(t), phi_R(t)); zero for periodic/zero kinds."""
        if self.kind == "dirichlet":
            return float(self.left(t)), float(self.right(t))
        return 0.0, 0.0

    def derivatives(self, t: float) -> tuple[float, float]:
        if self.kind != "dirichlet":
            return 0.0, 0.0
        if self.dleft is None or self.dright is None:
            raise GridError("boundary derivative callbacks were not supplied")
        return float(self.dleft(t)), float(self.dright(t))


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid on [a, b] with spacing dx = (b - a) / (M + 1)."""

    a: float
    b: float
    M: int
    boundary: Boundary = field(default_factory=Boundary.periodic)

    def __post_init__(self):
        if not self.b > self.a:
            raise GridError("need b > a")
        if self.M < 4:
            raise GridError(f"M must be at least 4, got {self.M}")

    @classmethod
    def from_spacing(cls, a: float, b: float, dx: float, boundary: Boundary | None = None) -> "Grid1D":
        intervals = (b - a) / dx
        n = int(round(intervals))
        if abs(intervals - n) > 1e-9 * max(1.0, intervals):
            raise GridError(f"dx={dx} does not divide [{a}, {b}]")
        return cls(a, b, n - 1, boundary or Boundary.periodic())

    @property
    def dx(self) -> float:
        return (self.b - self.a) / (self.M + 1)

    @property
    def n(self) -> int:
        """Length of a field on this grid."""
        return self.M + 1 if self.boundary.is_periodic else self.M

    @property
    def x(self) -> np.ndarray:
        """Coordinates of the nodes carried by a field."""
        m = np.arange(self.n) if self.boundary.is_periodic else np.arange(1, self.M + 1)
        return self.a + m * self.dx

    @property
    def x_full(self) -> np.ndarray:
        """All nodes x_0..x_{M+1}, endpoints included."""
        return self.a + np.arange(self.M + 2) * self.dx

    def coarsen(self, r: int) -> "Grid1D":
        """Subgrid with spacing r*dx; r must divide M+1."""
        if r < 1 or (self.M + 1) % r:
            raise GridError(f"r={r} does not divide M+1={self.M + 1}")
        return Grid1D(self.a, self.b, (self.M + 1) // r - 1, self.boundary)

    def check(self, u: np.ndarray) -> np.ndarray:
        """Validate a field (or a batch of fields along leading axes)."""
        u = np.asarray(u, dtype=float)
        if u.ndim == 0 or u.shape[-1] != self.n:
            raise GridError(f"field of shape {u.shape} does not live on a grid with n={self.n}")
        return u


def pad(u: np.ndarray, grid: Grid1D, width: int, ghosts: tuple[float, float] | None = None) -> np.ndarray:
    """Extend ``u`` by ``width`` entries on each side (last axis) according to the boundary.

    Periodic grids wrap; zero grids pad with zeros to any depth; Dirichlet grids
    admit a single ghost per side, taken from ``ghosts``.
    """
    if width == 0:
        return u
    kind = grid.boundary.kind
    if kind == "periodic":
        return np.concatenate((u[..., -width:], u, u[..., :width]), axis=-1)
    if kind == "zero":
        z = np.zeros(u.shape[:-1] + (width,))
        return np.concatenate((z, u, z), axis=-1)
    if width > 1:
        raise GridError(f"stencil needs {width} ghost values but a Dirichlet boundary provides 1")
    if ghosts is None:
        raise GridError("Dirichlet stencil applied without a boundary context")
    side = u.shape[:-1] + (1,)
    left = np.broadcast_to(np.asarray(ghosts[0], dtype=float).reshape(side if np.ndim(ghosts[0]) else ()), side)
    right = np.broadcast_to(np.asarray(ghosts[1], dtype=float).reshape(side if np.ndim(ghosts[1]) else ()), side)
    return np.concatenate((left, u, right), axis=-1)


def shift(u, k: int, grid: Grid1D, ghosts=None) -> np.ndarray:
    """Entry m of the result is entry m+k of ``u`` (the shift operator S^k)."""
    if abs(k) > 3:
        raise GridError(f"shift |k| <= 3 required, got {k}")
    u = grid.check(u)
    if k == 0:
        return u.copy()
    w = abs(k)
    ext = pad(u, grid, w, ghosts)
    return ext[..., w + k : w + k + grid.n]


def forward_diff(u, grid: Grid1D, ghosts=None) -> np.ndarray:
    u = grid.check(u)
    return (shift(u, 1, grid, ghosts) - u) / grid.dx


def average(u, grid: Grid1D, ghosts=None) -> np.ndarray:
    u = grid.check(u)
    return 0.5 * (shift(u, 1, grid, ghosts) + u)


def central_diff(u, order: int, grid: Grid1D, ghosts=None) -> np.ndarray:
    """Second-order centred approximation of the ``order``-th derivative.

    D_{2k} = D^{2k} S^{-k} and D_{2k-1} = D^{2k-1} S^{-k} mu, written out as
    explicit stencils.
    """
    if order not in (1, 2, 3, 4):
        raise GridError(f"order must be 1..4, got {order}")
    u = grid.check(u)
    h = grid.dx
    w = (order + 1) // 2
    e = pad(u, grid, w, ghosts)
    n = grid.n
    c = e[..., w : w + n]
    p1, m1 = e[..., w + 1 : w + 1 + n], e[..., w - 1 : w - 1 + n]
    if order == 1:
        return (p1 - m1) / (2 * h)
    if order == 2:
        return (p1 - 2 * c + m1) / h**2
    p2, m2 = e[..., w + 2 : w + 2 + n], e[..., w - 2 : w - 2 + n]
    if order == 3:
        return (p2 - 2 * p1 + 2 * m1 - m2) / (2 * h**3)
    return (p2 - 4 * p1 + 6 * c - 4 * m1 + m2) / h**4


def hadamard(f, g) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != g.shape:
        raise GridError(f"grid mismatch: {f.shape} vs {g.shape}")
    return f * g


def project_coarse(u, grid: Grid1D, r: int) -> np.ndarray:
    """Keep every r-th node (the projection P_r onto ``grid.coarsen(r)``).

    Periodic fields keep x_0, x_r, ...; interior Dirichlet fields keep
    x_r, x_2r, ..., x_{M+1-r}, so both endpoints survive as boundaries.
    """
    grid.coarsen(r)  # validates r
    u = grid.check(u)
    if grid.boundary.is_periodic:
        return u[..., ::r].copy()
    return u[..., r - 1 :: r].copy()


def divisors(n: int) -> list[int]:
    return [d for d in range(1, n + 1) if n % d == 0]
