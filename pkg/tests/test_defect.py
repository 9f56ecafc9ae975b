import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import estimator_error, loglog_slope
from optparam import kdv, nlh
from optparam.benchmarks import get_benchmark, kdv_soliton
from optparam.defect import (
    ParamVector,
    defect,
    defect_batch,
    discrete_norm,
    fd_step,
    param_jacobian,
    residual_and_jacobian,
)
from optparam.grid import Grid1D, project_coarse

DTS = (0.2, 0.1, 0.05)


def test_discrete_norm():
    assert discrete_norm(np.ones(4), 0.25) == pytest.approx(1.0)
    assert discrete_norm(np.zeros(3), 1.0) == 0.0


def test_fd_step_rule():
    assert fd_step(0.4) == pytest.approx(1.6e-5)
    assert fd_step(1e-3) == 1e-7


# ---------------------------------------------------------------- ParamVector


def test_param_vector_clamps_and_flags():
    p = ParamVector([0.5, -0.5], [-0.1, -0.1], [0.1, 0.1]).clamp()
    np.testing.assert_array_equal(p.values, [0.1, -0.1])
    assert p.clamped
    q = ParamVector([0.05], -0.1, 0.1).clamp()
    assert not q.clamped and q[0] == 0.05 and len(q) == 1


def test_param_vector_box_from_scheme(soliton_grid):
    p = ParamVector.for_scheme(kdv.MC(soliton_grid), 0.4, [1.0, 0.0])
    np.testing.assert_allclose(p.upper, 0.16)
    assert p.clamped and p[0] == pytest.approx(0.16)
    with pytest.raises(ValueError):
        ParamVector([0.0], 1.0, -1.0)


# ---------------------------------------------------------------- defect


def test_constant_state_has_zero_defect():
    g = Grid1D(0.0, 2 * np.pi, 15)
    rep = defect(kdv.EC(g), 0.1, np.full(16, 1.2), [0.005])
    np.testing.assert_allclose(rep.defect, 0.0, atol=1e-10)


@given(st.floats(0.02, 0.4), st.floats(-0.01, 0.01))
def test_estimator_is_scaled_defect(dt, alpha):
    g = Grid1D.from_spacing(-20, 20, 0.1)
    rep = defect(kdv.EC(g), dt, kdv_soliton(g.x, 5.0), [alpha])
    np.testing.assert_array_equal(rep.estimator, dt / 3 * rep.defect)
    assert rep.defect_norm == pytest.approx(discrete_norm(rep.defect, g.dx))


def test_batch_matches_single_evaluations(soliton_grid, centred_state):
    sc = kdv.MC(soliton_grid)
    chis = np.array([[0.0, 0.0], [0.01, 0.005], [-0.02, 0.01]])
    R = defect_batch(sc, 0.4, centred_state, chis)
    for c, r in zip(chis, R):
        np.testing.assert_allclose(r, defect(sc, 0.4, centred_state, c).defect, atol=1e-8)


def test_defect_is_second_order(soliton_grid, centred_state):
    sc = kdv.EC(soliton_grid)
    norms = [defect(sc, dt, centred_state, [0.0]).defect_norm for dt in DTS]
    assert 1.7 <= loglog_slope(DTS, norms) <= 2.3


@pytest.mark.parametrize("cls", [kdv.EC, kdv.MC])
def test_defect_second_order_with_scaled_parameters(soliton_grid, centred_state, cls):
    # parameters of size O(dt^2), as the search box prescribes
    sc = cls(soliton_grid)
    norms = [defect(sc, dt, centred_state, np.full(sc.n_params, 0.1 * dt * dt)).defect_norm for dt in DTS]
    assert 1.7 <= loglog_slope(DTS, norms) <= 2.3


@pytest.fixture(scope="module")
def estimator_errors():
    from oracles import centred_soliton, soliton_grid

    g = soliton_grid()
    u = centred_soliton(g)
    return [estimator_error(kdv.EC(g), u, dt, [0.0]) for dt in DTS]


def test_estimator_error_is_fourth_order(estimator_errors):
    errs = [e for e, _ in estimator_errors]
    assert 3.5 <= loglog_slope(DTS, errs) <= 4.5


def test_estimator_error_over_dt4_is_bounded(estimator_errors):
    scaled = [e / dt**4 for (e, _), dt in zip(estimator_errors, DTS)]
    assert max(scaled) / min(scaled) <= 2.0


def test_estimator_tracks_the_local_error(estimator_errors):
    # asymptotic correctness: the relative estimator error is O(dt^4) / O(dt^3) = O(dt)
    fracs = [e / loc for e, loc in estimator_errors]
    assert all(a / b >= 1.5 for a, b in zip(fracs, fracs[1:]))


def test_coarse_defect_approximates_projected_fine_defect(soliton_grid, centred_state):
    r, dt = 4, 0.4
    assert dt / soliton_grid.dx == pytest.approx(8.0)
    fine = defect(kdv.EC(soliton_grid), dt, centred_state, [0.0]).defect
    coarse_grid = soliton_grid.coarsen(r)
    coarse = defect(kdv.EC(coarse_grid), dt, project_coarse(centred_state, soliton_grid, r), [0.0]).defect
    pf = project_coarse(fine, soliton_grid, r)
    assert np.linalg.norm(coarse - pf) / np.linalg.norm(pf) <= 0.2


def test_nlh_defect_is_defined_at_dirichlet_boundaries():
    b = get_benchmark("nlh-wave")
    g = b.grid()
    rep = defect(nlh.CS(g), b.dt, b.exact(g.x, 0.6), [-0.004], t=0.6)
    assert np.all(np.isfinite(rep.defect)) and rep.defect_norm > 0


# ---------------------------------------------------------------- parameter Jacobian


def test_zero_state_has_zero_jacobian():
    g = get_benchmark("nlh-barenblatt").grid()
    J = param_jacobian(nlh.CS(g), 0.09, np.zeros(g.n), [0.001])
    assert J.shape == (g.n, 1) and np.all(J == 0.0)


def test_ec_jacobian_richardson(soliton_grid, centred_state):
    sc = kdv.EC(soliton_grid)
    dt = 0.4
    h = 1e-3
    J1 = param_jacobian(sc, dt, centred_state, [0.01], h=h)
    J2 = param_jacobian(sc, dt, centred_state, [0.01], h=h / 2)
    J4 = param_jacobian(sc, dt, centred_state, [0.01], h=h / 4)
    d1, d2 = np.linalg.norm(J1 - J2), np.linalg.norm(J2 - J4)
    assert d1 / d2 == pytest.approx(4.0, rel=0.2)


def test_residual_and_jacobian_agree_with_separate_calls(soliton_grid, centred_state):
    sc = kdv.MC(soliton_grid)
    chi = np.array([0.01, 0.004])
    R, J = residual_and_jacobian(sc, 0.4, centred_state, chi)
    np.testing.assert_allclose(R, defect(sc, 0.4, centred_state, chi).defect, atol=1e-8)
    np.testing.assert_allclose(J, param_jacobian(sc, 0.4, centred_state, chi), rtol=1e-6, atol=1e-6)
