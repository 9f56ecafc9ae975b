import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import centred_soliton, kdv_flow, soliton_grid
from optparam import kdv
from optparam.benchmarks import kdv_soliton
from optparam.diagnostics import conservation_error_global, relative_l2_error
from optparam.grid import Boundary, Grid1D, GridError, central_diff
from optparam.optimizer import run_fixed

SCHEMES = [
    (kdv.EC, (0.004,)),
    (kdv.MC, (0.003, -0.002)),
    (kdv.Multisymplectic, ()),
    (kdv.NarrowBox, ()),
]


def periodic_2pi(M1):
    return Grid1D(0.0, 2 * np.pi, M1 - 1)


# ---------------------------------------------------------------- semidiscrete operator


def test_rhs_vanishes_on_zero_and_constants():
    g = periodic_2pi(16)
    np.testing.assert_array_equal(kdv.kdv_rhs(np.zeros(16), g), 0.0)
    np.testing.assert_allclose(kdv.kdv_rhs(np.full(16, 2.5), g), 0.0, atol=1e-12)


def test_rhs_second_order_against_closed_form():
    errs = []
    for M1 in (32, 64, 128):
        g = periodic_2pi(M1)
        u = np.sin(g.x)
        exact = -(u * np.cos(g.x) - np.cos(g.x))
        errs.append(np.max(np.abs(kdv.kdv_rhs(u, g) - exact)))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.05)


def test_rhs_matches_unfused_stencil():
    g = soliton_grid()
    u = centred_soliton(g)
    ref = -central_diff(0.5 * u * u + central_diff(u, 2, g), 1, g)
    np.testing.assert_allclose(kdv.kdv_rhs(u, g), ref, atol=1e-10)


def test_rhs_rejects_dirichlet():
    g = Grid1D(0, 1, 9, Boundary.dirichlet(lambda t: 0.0, lambda t: 0.0))
    with pytest.raises(GridError):
        kdv.ec_step(np.zeros(9), 0.1, 0.0, g)


# ---------------------------------------------------------------- psi


def test_psi_zero_and_constant():
    g = periodic_2pi(16)
    np.testing.assert_array_equal(kdv.psi(np.zeros(16), np.zeros(16), 0.3, 0.1, g), 0.0)
    c = np.full(16, 1.7)
    np.testing.assert_allclose(kdv.psi(c, c, 0.3, 0.1, g), 1.7**2 / 2, atol=1e-12)


@given(st.floats(-0.05, 0.05))
def test_psi_affine_in_alpha(alpha):
    g = soliton_grid()
    u = centred_soliton(g)
    v = kdv_soliton(g.x, 5.1)
    diff = kdv.psi(u, v, alpha, 0.1, g) - kdv.psi(u, v, 0.0, 0.1, g)
    np.testing.assert_allclose(diff, alpha * kdv.D1((v - u) / 0.1, g), atol=1e-12)


# ---------------------------------------------------------------- steps


@pytest.mark.parametrize("cls,chi", SCHEMES)
def test_constants_are_fixed_points(cls, chi):
    g = periodic_2pi(16)
    c = np.full(16, 0.8)
    np.testing.assert_allclose(cls(g).step(c, 0.1, np.array(chi)), c, atol=1e-12)


@pytest.mark.parametrize("cls,chi", SCHEMES)
def test_step_satisfies_own_equations(cls, chi):
    g = soliton_grid()
    u = centred_soliton(g)
    sc = cls(g)
    v = sc.step(u, 0.2, np.array(chi))
    res = sc.residual(u, v, 0.2, np.array(chi))
    assert np.max(np.abs(res)) <= 1e-8


def test_ec_local_error_is_third_order_against_fine_reference():
    g = periodic_2pi(16)
    u = 1.0 + 0.3 * np.sin(g.x) + 0.1 * np.cos(2 * g.x)
    errs = []
    for dt in (1e-3, 5e-4):
        v = kdv.ec_step(u, dt, 0.0, g)
        ref = kdv_flow(g, u, dt, 1e-6)
        errs.append(np.max(np.abs(v - ref)))
    assert errs[0] / errs[1] == pytest.approx(8.0, rel=0.2)


def test_ec_batched_steps_match_single_steps():
    g = soliton_grid()
    u = centred_soliton(g)
    alphas = np.array([[0.0], [0.01], [-0.02]])
    V = kdv.EC(g).step(u, 0.4, alphas)
    for a, v in zip(alphas[:, 0], V):
        np.testing.assert_allclose(v, kdv.ec_step(u, 0.4, a, g), atol=1e-11)


def test_warm_start_reaches_the_same_step():
    g = soliton_grid()
    u = centred_soliton(g)
    cold = kdv.ec_step(u, 0.4, 0.01, g)
    warm = kdv.ec_step(u, 0.4, 0.01, g, guess=kdv.ec_step(u, 0.4, 0.012, g))
    np.testing.assert_allclose(warm, cold, atol=1e-11)


@pytest.mark.parametrize("cls,chi", SCHEMES)
def test_second_order_convergence(cls, chi):
    errs = []
    for dx, dt in ((0.2, 0.1), (0.1, 0.05)):
        g = Grid1D.from_spacing(-20, 20, dx)
        chi0 = np.zeros(cls.n_params)
        rec = run_fixed(cls(g), kdv_soliton(g.x, 5.0), dt, int(round(2.0 / dt)), chi0, t0=5.0)
        errs.append(relative_l2_error(rec.trajectory[-1], kdv_soliton(g.x, 7.0), g))
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)


# ---------------------------------------------------------------- time derivatives of the flow


def fd_in_dt(step, dt, h):
    return (step(dt + h) - step(dt - h)) / (2 * h)


def test_dtphi_zero_and_constant_states():
    g = periodic_2pi(16)
    z = np.zeros(16)
    c = np.full(16, 1.3)
    assert np.all(kdv.ec_dtphi(z, z, 0.01, 0.1, g) == 0.0)
    assert np.all(kdv.mc_dtphi(z, z, 0.01, 0.0, 0.1, g) == 0.0)
    np.testing.assert_allclose(kdv.ec_dtphi(c, c, 0.01, 0.1, g), 0.0, atol=1e-12)
    np.testing.assert_allclose(kdv.mc_dtphi(c, c, 0.01, 0.0, 0.1, g), 0.0, atol=1e-12)


def test_ec_dtphi_against_central_differences():
    g = soliton_grid()
    u = centred_soliton(g)
    dt, a = 0.2, 0.01
    v = kdv.ec_step(u, dt, a, g)
    d = kdv.ec_dtphi(u, v, a, dt, g)
    errs = [np.max(np.abs(d - fd_in_dt(lambda s: kdv.ec_step(u, s, a, g), dt, h))) for h in (1e-3, 5e-4)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)
    assert errs[1] <= 1e-6


def test_mc_exact_dtphi_against_central_differences():
    g = soliton_grid()
    u = centred_soliton(g)
    dt, b, c = 0.2, 0.01, 0.005
    v = kdv.mc_step(u, dt, b, c, g)
    d = kdv.mc_dtphi(u, v, b, c, dt, g, exact=True)
    errs = [np.max(np.abs(d - fd_in_dt(lambda s: kdv.mc_step(u, s, b, c, g), dt, h))) for h in (1e-3, 5e-4)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.2)
    assert errs[1] <= 1e-6


def test_mc_printed_dtphi_is_a_second_order_in_space_approximation():
    # the default form differs from the exact derivative by O(dx^2), whatever h is
    gaps = []
    for dx in (0.1, 0.05):
        g = Grid1D.from_spacing(-20, 20, dx)
        u = kdv_soliton(g.x, 5.0)
        v = kdv.mc_step(u, 0.2, 0.01, 0.005, g)
        gaps.append(
            np.max(np.abs(kdv.mc_dtphi(u, v, 0.01, 0.005, 0.2, g) - kdv.mc_dtphi(u, v, 0.01, 0.005, 0.2, g, True)))
        )
    assert gaps[0] / gaps[1] == pytest.approx(4.0, rel=0.2)


# ---------------------------------------------------------------- conservation


def test_densities_of_zero_vanish():
    g = periodic_2pi(16)
    z = np.zeros(16)
    for cls, chi in SCHEMES:
        sc = cls(g)
        for G in sc.densities(z, np.array(chi)).values():
            assert np.all(G == 0.0)
        for F in sc.fluxes(z, z, 0.1, np.array(chi)).values():
            assert np.all(F == 0.0)
    np.testing.assert_array_equal(kdv.EC(g).densities(np.arange(16.0), np.zeros(1))[1], np.arange(16.0))


@pytest.fixture(scope="module")
def fixed_runs():
    g = soliton_grid()
    u0 = kdv_soliton(g.x, 0.0)
    out = {}
    for cls, chi in SCHEMES[:2]:
        sc = cls(g)
        out[cls.name] = (sc, run_fixed(sc, u0, 0.4, 25, np.array(chi)))
    return out


@pytest.mark.parametrize("name,laws", [("EC", (1, 3)), ("MC", (1, 2))])
def test_fixed_parameter_runs_conserve_their_laws(fixed_runs, name, laws):
    sc, rec = fixed_runs[name]
    assert not rec.failed
    for k in laws:
        assert conservation_error_global(rec, k, sc) <= 1e-10


def test_local_conservation_laws_hold_nodewise():
    g = soliton_grid()
    u = centred_soliton(g)
    for cls, chi in SCHEMES:
        sc = cls(g)
        chi = np.array(chi)
        v = sc.step(u, 0.2, chi)
        G0, G1 = sc.densities(u, chi), sc.densities(v, chi)
        for k in sc.preserved:
            F = sc.fluxes(u, v, 0.2, chi)[k]
            F = F[: g.n] if F.size == g.n else F
            div = (np.roll(F, -1) - F) / g.dx + (G1[k] - G0[k]) / 0.2
            assert np.max(np.abs(div)) <= 1e-8, (cls.name, k)
