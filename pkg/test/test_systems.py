import sys, os

sys.path.append(os.path.join(os.path.dirname(__file__), ".."))

import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st
from numpy.testing import assert_allclose

from qns.errors import FormulationError, InvalidArgument
from qns.fieldkit import (
    Grid,
    ScalarField,
    VectorField,
    derivative_order,
    integral,
    random_smooth_positive,
    random_smooth_vector,
    track_order,
)
from qns.functionals import mass_source
from qns.qnsops import QnsParams, State, to_w
from qns.systems import (
    APPROX_U,
    APPROX_W,
    SYSTEMS,
    TARGET,
    TestFunction,
    approx_u_terms,
    approx_w_terms,
    get_system,
    implied_u_rates,
    rhs_approx_u,
    rhs_approx_w,
    rhs_target,
    target_terms,
    weak_residual,
)

PARAMS = QnsParams(nu=1.0, kappa=1 / 11, r0=0.5, r1=0.5, eps=1e-3)


def smooth_state(dim=1, n=64, seed=None):
    grid = Grid.cube(dim, n)
    if seed is not None:
        return State(random_smooth_positive(grid, seed, 2, 1.0, 0.2), random_smooth_vector(grid, seed, 2, 0.3))
    x = grid.coordinates[0]
    rho = 1 + 0.2 * np.sin(x)
    u = np.stack([0.3 * np.cos(x + c) for c in range(dim)])
    return State(ScalarField(grid, rho), VectorField(grid, u))


def rest_state(dim=2, n=16):
    grid = Grid.cube(dim, n)
    return State(ScalarField(grid, 2.0 * np.ones(grid.shape)), VectorField.zeros(grid))


def test_unknown_system():
    with pytest.raises(InvalidArgument):
        get_system("navier-stokes")


def test_approx_u_reduces_to_target_without_eps():
    state = smooth_state(2, 32, seed=4)
    params = PARAMS.replace(eps=0.0)
    target = rhs_target(state, params)
    approx = rhs_approx_u(state, params)
    assert_allclose(approx.drho.values, target.drho.values, atol=1e-12)
    assert_allclose(approx.dvel.values, target.dvel.values, atol=1e-12)


@pytest.mark.parametrize("name", [TARGET, APPROX_U, APPROX_W])
def test_constant_state_is_steady(name):
    state = rest_state()
    if SYSTEMS[name].form != state.form:
        state = to_w(state, PARAMS)
    rhs = SYSTEMS[name].rhs(state, PARAMS.replace(eps=0.0))
    assert_allclose(rhs.drho.values, 0, atol=1e-12)
    assert_allclose(rhs.dvel.values, 0, atol=1e-12)


def test_formulation_is_enforced():
    with pytest.raises(FormulationError):
        rhs_approx_w(smooth_state(), PARAMS)


def test_target_keeps_convection_next_to_linear_damping():
    grid = Grid.cube(1, 64)
    x = grid.coordinates[0]
    state = State(ScalarField(grid, np.ones(grid.shape)), VectorField(grid, np.sin(x)[np.newaxis]))
    rhs = rhs_target(state, QnsParams(nu=0.0, kappa=0.0, r0=1.0), breakdown=True)
    assert_allclose(rhs.breakdown.momentum["damping_r0"][0], -np.sin(x), atol=1e-14)
    assert_allclose(rhs.breakdown.momentum["convection"][0], -np.sin(x) * np.cos(x), atol=1e-12)
    assert_allclose(rhs.dvel.values[0], -np.sin(x) - np.sin(x) * np.cos(x), atol=1e-12)


def test_approx_u_mass_source():
    grid = Grid.cube(1, 64)
    params = QnsParams(nu=1.0, eps=1e-2)
    rest = State(ScalarField(grid, np.ones(grid.shape)), VectorField.zeros(grid))
    assert_allclose(rhs_approx_u(rest, params).drho.values, 1e-2, atol=1e-14)
    state = smooth_state(1, 64)
    produced = integral(rhs_approx_u(state, params).drho.values, grid)
    assert produced == pytest.approx(mass_source(state, params), rel=1e-9, abs=1e-13)


def test_breakdown_sums_to_the_assembled_rates():
    state = smooth_state(1, 64)
    rhs = rhs_approx_u(state, PARAMS, dealias=False, breakdown=True)
    terms = rhs.breakdown
    assert "bohm" in terms.momentum and "eps_cubic_drag" in terms.momentum
    assert_allclose(terms.continuity_total(), rhs.drho.values, atol=1e-12)
    assert_allclose(terms.momentum_total() / state.rho.values, rhs.dvel.values, atol=1e-12)


def _max_order(terms):
    return max(derivative_order(value) for value in terms.values())


def test_effective_velocity_form_stays_second_order():
    grid = Grid.cube(2, 16)
    state = smooth_state(2, 16, seed=1)
    rho, vel = track_order(state.rho.values), track_order(state.vel.values)
    continuity, momentum = approx_w_terms(rho, vel, PARAMS, grid.spectral)
    assert _max_order(continuity) <= 2
    assert _max_order(momentum) <= 2


@pytest.mark.parametrize("terms", [target_terms, approx_u_terms])
def test_velocity_forms_need_third_derivatives(terms):
    grid = Grid.cube(1, 32)
    state = smooth_state(1, 32)
    _, momentum = terms(track_order(state.rho.values), track_order(state.vel.values), PARAMS, grid.spectral)
    assert derivative_order(momentum["bohm"]) == 3
    assert _max_order(momentum) >= 3


@pytest.mark.parametrize("eps", [0.0, 1e-3])
def test_effective_velocity_rates_imply_velocity_rates(eps):
    params = PARAMS.replace(eps=eps)
    state_u = smooth_state(1, 64)
    state_w = to_w(state_u, params)
    expected = rhs_approx_u(state_u, params, dealias=False)
    drho, du = implied_u_rates(state_w, rhs_approx_w(state_w, params, dealias=False), params)
    scale = np.max(np.abs(expected.dvel.values))
    assert_allclose(drho.values, expected.drho.values, atol=1e-8)
    assert_allclose(du.values, expected.dvel.values, atol=1e-8 * max(scale, 1.0))


def test_linear_coefficients():
    params = QnsParams(nu=1.0, kappa=1 / 11, eps=1e-4)
    target = get_system(TARGET).linear_coefficients(params)
    assert (target.alpha, target.beta_t, target.beta_l) == (0.0, 1.0, 2.0)
    approx_u = get_system(APPROX_U).linear_coefficients(params)
    assert approx_u.beta_t == pytest.approx(1.01)
    assert approx_u.beta_l == pytest.approx(2.01)
    approx_w = get_system(APPROX_W).linear_coefficients(params)
    assert approx_w.alpha == pytest.approx(params.mu)
    assert approx_w.beta_l == pytest.approx(2.01 - params.mu)


def test_test_function_time_profile():
    phi = TestFunction((1,), horizon=2.0)
    assert phi.psi(0.0, 2.0) == 1.0
    assert phi.psi(2.0, 2.0) == pytest.approx(0.0, abs=1e-15)
    assert phi.dpsi(0.0, 2.0) == 0.0
    with pytest.raises(InvalidArgument):
        TestFunction((1, 1)).spatial(Grid.cube(1, 16))


@settings(max_examples=10)
@given(st.integers(min_value=0, max_value=3), st.sampled_from(["cos", "sin"]))
def test_weak_residual_of_a_steady_state_vanishes(mode, kind):
    params = QnsParams(nu=1.0, kappa=1 / 11)
    grid = Grid.cube(1, 32)
    frames = [
        State(ScalarField(grid, np.ones(grid.shape)), VectorField.zeros(grid), time=t) for t in (0.0, 0.05, 0.1)
    ]
    assert weak_residual(frames, TestFunction((mode,), kind=kind), params) < 1e-10


def test_weak_residual_rejects_bad_trajectories():
    grid = Grid.cube(1, 16)
    state = State(ScalarField(grid, np.ones(grid.shape)), VectorField.zeros(grid))
    with pytest.raises(InvalidArgument):
        weak_residual([state], TestFunction((1,)), PARAMS)
    with pytest.raises(InvalidArgument):
        weak_residual([state, state], TestFunction((1,)), PARAMS)
