"""Banded and cyclic-banded linear solves, and a Newton iteration on top of them.

Matrices may carry a leading batch axis: bands of shape (B, n) describe B
independent n-by-n matrices, solved together as one stacked banded system.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import lapack

_DGBSV = lapack.dgbsv


class SingularJacobian(np.linalg.LinAlgError):
    pass


class NonConvergence(RuntimeError):
    pass


@dataclass
class StructuredMatrix:
    """Square matrix stored by diagonals.

    ``bands[k][..., i]`` is the entry in row i, column i+k. With ``cyclic=True``
    the column index wraps modulo n (periodic grids); otherwise entries falling
    outside the matrix are ignored. All bands share one shape (..., n).
    """

    n: int
    bands: dict[int, np.ndarray]
    cyclic: bool = False

    def __post_init__(self):
        shapes = {np.shape(c) for c in self.bands.values()}
        if len(shapes) > 1:
            self.bands = dict(zip(self.bands, np.broadcast_arrays(*self.bands.values())))
            shapes = {np.shape(c) for c in self.bands.values()}
        for shape in shapes:
            if not shape or shape[-1] != self.n:
                raise ValueError(f"band shape {shape} does not end in n={self.n}")
        if any(abs(k) >= self.n for k in self.bands):
            raise ValueError(f"band offset too large for n={self.n}")

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return next(iter(self.bands.values())).shape[:-1] if self.bands else ()

    @property
    def lower_bw(self) -> int:
        return max([-k for k in self.bands if k < 0], default=0)

    @property
    def upper_bw(self) -> int:
        return max([k for k in self.bands if k > 0], default=0)

    def scaled(self, s: float) -> "StructuredMatrix":
        return StructuredMatrix(self.n, {k: s * c for k, c in self.bands.items()}, self.cyclic)

    def block(self, idx) -> "StructuredMatrix":
        return StructuredMatrix(self.n, {k: c[idx] for k, c in self.bands.items()}, self.cyclic)

    def to_dense(self) -> np.ndarray:
        if self.batch_shape:
            raise ValueError("to_dense needs an unbatched matrix; use block()")
        n = self.n
        a = np.zeros((n, n))
        i = np.arange(n)
        for k, c in self.bands.items():
            j = i + k
            ok = (j >= 0) & (j < n)
            a[i[ok], j[ok]] += c[ok]
            if self.cyclic:
                a[i[~ok], j[~ok] % n] += c[~ok]
        return a

    def matvec(self, x: np.ndarray) -> np.ndarray:
        n = self.n
        lo, up = self.lower_bw, self.upper_bw
        if self.cyclic:
            e = np.concatenate((x[..., n - lo :], x, x[..., :up]), axis=-1)
        else:
            z = x.shape[:-1]
            e = np.concatenate((np.zeros(z + (lo,)), x, np.zeros(z + (up,))), axis=-1)
        y = np.zeros(np.broadcast_shapes(self.batch_shape + (n,), x.shape))
        for k, c in self.bands.items():
            y = y + c * e[..., lo + k : lo + k + n]
        return y


@functools.lru_cache(maxsize=64)
def _layout(n: int, offsets: tuple[int, ...]):
    """Index data for a band layout.

    Returns the (band, row) pairs whose entry falls outside the matrix, the
    distinct such rows R, and per pair its slot in R and its wrapped column.
    """
    bi, ri = [], []
    for j, k in enumerate(offsets):
        rows = np.arange(n - k, n) if k > 0 else np.arange(0, -k) if k < 0 else np.arange(0)
        bi.append(np.full(rows.size, j))
        ri.append(rows)
    bi = np.concatenate(bi).astype(int)
    ri = np.concatenate(ri).astype(int)
    cols = (ri + np.asarray(offsets)[bi]) % n
    R = np.unique(ri)
    C = np.unique(cols)
    return bi, ri, R, np.searchsorted(R, ri), np.searchsorted(C, cols), C


def _stacked_storage(P: np.ndarray, offsets, lo: int, up: int, extra: int) -> np.ndarray:
    """LAPACK band storage of the block-diagonal stack of (nb, B, n) bands P."""
    N = P.shape[1] * P.shape[2]
    ab = np.zeros((extra + lo + up + 1, N))
    for j, k in enumerate(offsets):
        flat = P[j].reshape(N)
        if k >= 0:
            ab[extra + up - k, k:] = flat[: N - k]
        else:
            ab[extra + up - k, : N + k] = flat[-k:]
    return ab


def _gbsv(lo, up, ab, b):
    _, _, x, info = _DGBSV(lo, up, ab, b, overwrite_ab=1)
    if info != 0:
        raise np.linalg.LinAlgError(f"banded LU failed (info={info})")
    return x


def _scale(A: StructuredMatrix) -> float:
    # entries of the KdV Jacobians reach ~1/dx^3; residual tests are relative to that
    return max(float(np.max(np.abs(c))) for c in A.bands.values()) if A.bands else 1.0


def _dense_solve(A: StructuredMatrix, rhs):
    try:
        x = np.linalg.solve(A.to_dense(), rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularJacobian(str(exc)) from exc
    res = np.linalg.norm(A.matvec(x) - rhs)
    if not np.isfinite(res) or res > 1e-8 * (1.0 + np.linalg.norm(rhs)) * max(1.0, _scale(A)):
        raise SingularJacobian(f"linear solve residual {res:.3e}")
    return x


def _dense_blocks(A: StructuredMatrix, rhs, batch):
    if not batch:
        return _dense_solve(A, rhs)
    return np.stack([_dense_solve(A.block(b), rhs[b]) for b in range(batch[0])])


# above this the corner correction loses too many digits and the dense path is used
CAPACITANCE_COND_MAX = 1e8


def solve_linear(A: StructuredMatrix, rhs) -> np.ndarray:
    """Solve A x = rhs in O(n) work per block.

    Cyclic systems are split as A = B + U V^T, with B the non-wrapping band and
    U V^T the corner blocks, and solved with the Sherman-Morrison-Woodbury
    identity on top of the banded LU of B. An ill-conditioned capacitance
    matrix or a singular band triggers a dense LU fallback.
    """
    n = A.n
    batch = A.batch_shape
    if len(batch) > 1:
        raise ValueError("at most one batch axis is supported")
    rhs = np.asarray(rhs, dtype=float)
    rhs = np.broadcast_to(rhs, batch + (n,)) if rhs.shape != batch + (n,) else rhs
    B = batch[0] if batch else 1
    lo, up = A.lower_bw, A.upper_bw
    if n <= 2 * (lo + up) + 1:
        return _dense_blocks(A, rhs, batch)
    offsets = tuple(A.bands)
    P = np.empty((len(offsets), B, n))
    for j, c in enumerate(A.bands.values()):
        P[j] = np.reshape(c, (B, n)) if np.ndim(c) > 1 else c
    bi, ri, R, pos, cpos, C = _layout(n, offsets)
    vals = P[bi, :, ri]  # (m, B): entries that leave the matrix
    P[bi, :, ri] = 0.0
    ab = _stacked_storage(P, offsets, lo, up, extra=lo)
    try:
        if not A.cyclic:
            x = _gbsv(lo, up, ab, rhs.reshape(B * n))
        else:
            # V^T only touches the columns C, so keep it compressed to (B, q, |C|)
            q = R.size
            Vc = np.zeros((B, q, C.size))
            Vc[:, pos, cpos] = vals.T
            rhs_all = np.zeros((B, n, q + 1))
            rhs_all[:, :, 0] = rhs.reshape(B, n)
            rhs_all[:, R, 1 + np.arange(q)] = 1.0
            Z = _gbsv(lo, up, ab, rhs_all.reshape(B * n, q + 1)).reshape(B, n, q + 1)
            ZC = Vc @ Z[:, C, :]
            cap = np.eye(q) + ZC[:, :, 1:]
            cap_inv = np.linalg.inv(cap)
            cond = np.abs(cap).sum(axis=1).max(axis=1) * np.abs(cap_inv).sum(axis=1).max(axis=1)
            if not np.all(np.isfinite(cond)) or np.any(cond > CAPACITANCE_COND_MAX):
                return _dense_blocks(A, rhs, batch)
            w = cap_inv @ ZC[:, :, :1]
            x = (Z[:, :, 0] - (Z[:, :, 1:] @ w)[:, :, 0]).reshape(B * n)
    except (np.linalg.LinAlgError, ValueError):
        return _dense_blocks(A, rhs, batch)
    if not np.all(np.isfinite(x)):
        return _dense_blocks(A, rhs, batch)
    return x.reshape(batch + (n,))


@dataclass(frozen=True)
class NewtonConfig:
    residual_tol: float = 1e-12
    step_tol: float = 1e-13
    max_iter: int = 50

    def __post_init__(self):
        if self.residual_tol <= 0 or self.step_tol <= 0 or self.max_iter < 1:
            raise ValueError("tolerances must be positive and max_iter >= 1")


DEFAULT_NEWTON = NewtonConfig()


def newton_solve(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], StructuredMatrix],
    guess,
    cfg: NewtonConfig = DEFAULT_NEWTON,
) -> np.ndarray:
    """Undamped Newton iteration with a structured Jacobian.

    Each field (row of a batch) is done once ||F(u)|| <= residual_tol *
    (1 + ||F(guess)||), or its last update is below step_tol relative to
    ||u||_inf, or it stalls at the round-off floor (residual no longer halving
    while already within 1e4 of the target). The batch stops when every row
    is done.
    """
    u = np.array(guess, dtype=float)
    F = residual(u)
    normF = np.linalg.norm(F, axis=-1)
    target = cfg.residual_tol * (1.0 + normF)
    done = normF <= target
    for _ in range(cfg.max_iter):
        if np.all(done):
            return u
        du = solve_linear(jacobian(u), -F)
        u = u + du
        if not np.all(np.isfinite(u)):
            raise NonConvergence("Newton iterate is not finite")
        F = residual(u)
        newF = np.linalg.norm(F, axis=-1)
        small_step = np.max(np.abs(du), axis=-1) <= cfg.step_tol * (1.0 + np.max(np.abs(u), axis=-1))
        stalled = (newF <= 1e4 * target) & (newF > 0.5 * normF)
        done = done | (newF <= target) | small_step | stalled
        normF = newF
    if np.all(done):
        return u
    raise NonConvergence(f"Newton did not converge in {cfg.max_iter} iterations (|F|={np.max(normF):.3e})")
