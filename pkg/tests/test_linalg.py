import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import dense_banded, picard_ec_step
from optparam import kdv
from optparam.grid import Grid1D
from optparam.linalg import (
    NewtonConfig,
    NonConvergence,
    SingularJacobian,
    StructuredMatrix,
    newton_solve,
    solve_linear,
)


def random_bands(rng, n, lo, up, dominance=4.0, batch=()):
    bands = {k: rng.uniform(-1, 1, batch + (n,)) for k in range(-lo, up + 1)}
    bands[0] = bands[0] + np.sign(bands[0]) * dominance * (lo + up + 1)
    return bands


# ---------------------------------------------------------------- solve_linear


def test_identity_returns_rhs():
    v = np.arange(1.0, 9.0)
    A = StructuredMatrix(8, {0: np.ones(8)})
    np.testing.assert_array_equal(solve_linear(A, v), v)


def test_tridiagonal_hand_elimination():
    A = StructuredMatrix(3, {-1: -np.ones(3), 0: 2 * np.ones(3), 1: -np.ones(3)})
    np.testing.assert_allclose(solve_linear(A, [1.0, 0.0, 0.0]), [0.75, 0.5, 0.25], atol=1e-15)


@pytest.mark.parametrize("cyclic", [False, True])
@pytest.mark.parametrize("lo,up", [(1, 1), (2, 2), (3, 3), (1, 3), (3, 0)])
def test_banded_matches_dense_oracle(rng, cyclic, lo, up):
    n = 40
    bands = random_bands(rng, n, lo, up)
    rhs = rng.standard_normal(n)
    x = solve_linear(StructuredMatrix(n, bands, cyclic), rhs)
    ref = np.linalg.solve(dense_banded(n, bands, cyclic), rhs)
    assert np.max(np.abs(x - ref)) <= 1e-10


def test_to_dense_and_matvec_agree_with_oracle(rng):
    bands = random_bands(rng, 12, 2, 3)
    for cyclic in (False, True):
        A = StructuredMatrix(12, bands, cyclic)
        D = dense_banded(12, bands, cyclic)
        np.testing.assert_allclose(A.to_dense(), D)
        x = rng.standard_normal(12)
        np.testing.assert_allclose(A.matvec(x), D @ x, atol=1e-13)


def test_cyclic_random_instances_have_small_residual():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(8, 257))
        lo, up = (int(b) for b in rng.integers(1, 4, size=2))
        bands = random_bands(rng, n, lo, up)
        A = StructuredMatrix(n, bands, cyclic=True)
        rhs = rng.standard_normal(n)
        x = solve_linear(A, rhs)
        assert np.linalg.norm(A.matvec(x) - rhs) <= 1e-10 * (1 + np.linalg.norm(rhs))


def test_batched_solve_matches_blockwise(rng):
    n, B = 30, 5
    bands = random_bands(rng, n, 3, 3, batch=(B,))
    rhs = rng.standard_normal((B, n))
    A = StructuredMatrix(n, bands, cyclic=True)
    X = solve_linear(A, rhs)
    for b in range(B):
        np.testing.assert_allclose(X[b], solve_linear(A.block(b), rhs[b]), atol=1e-12)


def test_cyclic_without_dominance_still_solved(rng):
    # the periodic KdV Jacobians are far from diagonally dominant
    g = Grid1D.from_spacing(-20, 20, 0.05)
    u = 3.0 / np.cosh(0.5 * g.x) ** 2
    J = kdv.ec_jacobian(u, u, 0.4, 0.0, g)
    rhs = rng.standard_normal(g.n)
    x = solve_linear(J, rhs)
    assert np.linalg.norm(J.matvec(x) - rhs) <= 1e-10 * (1 + np.linalg.norm(rhs))


def test_singular_matrix_raises():
    A = StructuredMatrix(6, {-1: np.ones(6), 0: -2 * np.ones(6), 1: np.ones(6)}, cyclic=True)
    with pytest.raises(SingularJacobian):
        solve_linear(A, np.arange(6.0))


def test_bad_band_shapes_rejected():
    with pytest.raises(ValueError):
        StructuredMatrix(5, {0: np.ones(4)})
    with pytest.raises(ValueError):
        StructuredMatrix(5, {5: np.ones(5)})


# ---------------------------------------------------------------- newton_solve


def diag_jac(d):
    return lambda u: StructuredMatrix(u.shape[-1], {0: d(u)})


def test_newton_affine_one_iteration():
    c = np.array([1.0, -2.0, 3.5, 0.25])
    calls = []

    def res(u):
        calls.append(1)
        return u - c

    u = newton_solve(res, diag_jac(lambda u: np.ones_like(u)), np.zeros(4))
    np.testing.assert_allclose(u, c, atol=1e-15)
    assert len(calls) == 2  # the initial residual and one update


def test_newton_quadratic_convergence():
    iterates = []

    def res(u):
        iterates.append(float(u[0]))
        return u * u - 4.0

    u = newton_solve(res, diag_jac(lambda u: 2 * u), np.array([3.0]), NewtonConfig(1e-15, 1e-16, 50))
    assert abs(u[0] - 2.0) <= 1e-12
    assert len(iterates) - 1 <= 5
    e = [abs(x - 2.0) for x in iterates]
    ratios = [e[k + 1] / e[k] ** 2 for k in range(len(e) - 1) if e[k] > 1e-7 and e[k + 1] > 0]
    assert ratios and all(r <= 1.0 for r in ratios[-3:])


def test_newton_nonconvergence():
    with pytest.raises(NonConvergence):
        newton_solve(
            lambda u: u * u + 1.0, diag_jac(lambda u: 2 * u + 1e-3), np.array([3.0]), NewtonConfig(max_iter=5)
        )


def test_newton_config_validation():
    with pytest.raises(ValueError):
        NewtonConfig(residual_tol=0.0)
    with pytest.raises(ValueError):
        NewtonConfig(max_iter=0)


def test_ec_newton_matches_picard_oracle():
    g = Grid1D(0.0, 2 * np.pi, 7)
    u = 1.0 + 0.5 * np.sin(g.x)
    for alpha in (0.0, 1e-3):
        v = kdv.ec_step(u, 1e-3, alpha, g)
        np.testing.assert_allclose(v, picard_ec_step(u, 1e-3, alpha, g), atol=1e-10)


@given(st.floats(0.5, 4.0), st.floats(-1.0, 1.0))
def test_newton_scalar_roots(c, shift):
    u = newton_solve(lambda u: u**3 - c, diag_jac(lambda u: 3 * u * u), np.array([c + 1 + abs(shift)]))
    assert abs(u[0] - c ** (1 / 3)) <= 1e-10
