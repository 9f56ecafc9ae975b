"""Defect-based local error estimate and its parameter Jacobian.

For a one-step method u_{n+1} = Phi(dt, u_n, chi) approximating u' = A(u, t),
the defect is R = d/d(dt) Phi - A(Phi) and L = dt/(p+1) R estimates the local
error of an order-p method.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .scheme import Scheme

ORDER = 2


def discrete_norm(v, dx: float) -> float:
    """Discrete L2 norm sqrt(dx * sum v^2)."""
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(dx * np.dot(v, v)))


@dataclass
class ParamVector:
    """Parameter values together with the box they must stay in."""

    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    clamped: bool = False

    def __post_init__(self):
        self.values = np.atleast_1d(np.asarray(self.values, dtype=float))
        self.lower = np.broadcast_to(np.asarray(self.lower, dtype=float), self.values.shape).copy()
        self.upper = np.broadcast_to(np.asarray(self.upper, dtype=float), self.values.shape).copy()
        if np.any(self.lower > self.upper):
            raise ValueError("empty parameter box")

    @classmethod
    def for_scheme(cls, scheme: Scheme, dt: float, values: Sequence[float] | None = None) -> "ParamVector":
        lo, hi = scheme.box(dt)
        if values is None:
            values = np.zeros(scheme.n_params)
        return cls(np.asarray(values, dtype=float), lo, hi).clamp()

    def with_values(self, values) -> "ParamVector":
        return ParamVector(values, self.lower, self.upper).clamp()

    def clamp(self) -> "ParamVector":
        v = np.clip(self.values, self.lower, self.upper)
        return ParamVector(v, self.lower, self.upper, clamped=bool(np.any(v != self.values)))

    def __len__(self):
        return self.values.size

    def __iter__(self):
        return iter(self.values)

    def __getitem__(self, k):
        return self.values[k]


@dataclass
class DefectReport:
    defect: np.ndarray
    estimator: np.ndarray
    defect_norm: float
    chi: np.ndarray
    u_next: np.ndarray = field(repr=False)


def defect(scheme: Scheme, dt: float, u, chi, t: float = 0.0, p: int = ORDER) -> DefectReport:
    """Evaluate the defect of ``scheme`` at (dt, u, chi).

    The temporary step u_{n+1} is always recomputed, never cached.
    """
    chi = np.atleast_1d(np.asarray(getattr(chi, "values", chi), dtype=float))
    v = scheme.step(u, dt, chi, t)
    R = scheme.dtphi(u, v, dt, chi, t) - scheme.rhs(v, t + dt)
    return DefectReport(
        defect=R,
        estimator=dt / (p + 1) * R,
        defect_norm=discrete_norm(R, scheme.grid.dx),
        chi=chi,
        u_next=v,
    )


def defect_batch(scheme: Scheme, dt: float, u, chis, t: float = 0.0, guess=None, with_steps: bool = False):
    """Defects at a (B, K) batch of parameter vectors, as a (B, n) array.

    ``guess`` seeds the Newton iteration of every temporary step; the steps
    themselves are returned too when ``with_steps`` is set.
    """
    chis = np.atleast_2d(np.asarray(chis, dtype=float))
    v = scheme.step(u, dt, chis, t, guess=guess)
    R = scheme.dtphi(u, v, dt, chis, t) - scheme.rhs(v, t + dt)
    return (R, v) if with_steps else R


def fd_points(chi, h: float) -> np.ndarray:
    """The 2K central-difference points chi +- h e_k, ordered (+e_0, -e_0, +e_1, ...)."""
    chi = np.atleast_1d(np.asarray(chi, dtype=float))
    E = h * np.eye(chi.size)
    return np.stack([c for k in range(chi.size) for c in (chi + E[k], chi - E[k])])


def fd_columns(Rpm: np.ndarray, h: float) -> np.ndarray:
    return ((Rpm[0::2] - Rpm[1::2]) / (2 * h)).T


def residual_and_jacobian(scheme: Scheme, dt: float, u, chi, t: float = 0.0, h: float | None = None):
    """Defect at chi and its central-difference parameter Jacobian, from one batched evaluation."""
    h = fd_step(dt) if h is None else h
    chi = np.atleast_1d(np.asarray(chi, dtype=float))
    Rs = defect_batch(scheme, dt, u, np.vstack([chi[None, :], fd_points(chi, h)]), t)
    return Rs[0], fd_columns(Rs[1:], h)


def fd_step(dt: float) -> float:
    return max(1e-7, 1e-4 * dt * dt)


def fd_jacobian(fn: Callable[[np.ndarray], np.ndarray], chi, h: float) -> np.ndarray:
    """Central-difference Jacobian of a vector function of the parameters."""
    chi = np.atleast_1d(np.asarray(chi, dtype=float))
    cols = []
    for k in range(chi.size):
        e = np.zeros_like(chi)
        e[k] = h
        cols.append((fn(chi + e) - fn(chi - e)) / (2 * h))
    return np.column_stack(cols)


def param_jacobian(scheme: Scheme, dt: float, u, chi, t: float = 0.0, h: float | None = None) -> np.ndarray:
    """d R / d chi by central differences, one column per parameter.

    Column k is (R(chi + h e_k) - R(chi - h e_k)) / (2h) with
    h = max(1e-7, 1e-4 dt^2); all 2K evaluations run as one batch.
    """
    h = fd_step(dt) if h is None else h
    chi = getattr(chi, "values", chi)
    return fd_columns(defect_batch(scheme, dt, u, fd_points(chi, h), t), h)
