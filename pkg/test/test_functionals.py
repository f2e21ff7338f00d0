import sys, os

sys.path.append(os.path.join(os.path.dirname(__file__), ".."))

import numpy as np
import pytest
from hypothesis import given, settings, example
import hypothesis.strategies as st

from qns.errors import FormulationError, InvalidArgument, VacuumError
from qns.fieldkit import Grid, ScalarField, integral, VectorField, random_smooth_positive, random_smooth_vector
from qns.functionals import (
    ACCUMULATED_KEYS,
    APRIORI_KEYS,
    BD_KEYS,
    DISSIPATION_KEYS,
    FunctionalReport,
    MonitorRecord,
    agreement_report,
    apriori_integrands,
    bd_dissipation,
    bd_entropy,
    budget_energy,
    check_bd_momentum_identity,
    check_div_vs_D,
    check_flux_identity,
    check_grad6,
    check_grad_sqrtrho_u,
    check_jungel,
    energy,
    energy_dissipation,
    energy_parts,
    mass_source,
    monitor_record,
    mv_functional,
    mv_functional_w,
)
from qns.qnsops import Form, QnsParams, State, to_w


def rest_state(dim=1, n=32):
    grid = Grid.cube(dim, n)
    return State(ScalarField(grid, np.ones(grid.shape)), VectorField.zeros(grid))


def random_state(seed, dim=1, n=64, modes=2):
    grid = Grid.cube(dim, n)
    return State(random_smooth_positive(grid, seed, modes, 1.0, 0.25), random_smooth_vector(grid, seed, modes, 0.5))


def test_uniform_rest_values():
    state = rest_state()
    params = QnsParams()
    assert energy(state, params) == pytest.approx(4 * np.pi)
    assert mv_functional(state) == pytest.approx(2 * np.pi * np.e)
    assert bd_entropy(state, params) == pytest.approx(0.0, abs=1e-14)
    assert budget_energy(state, params) == pytest.approx(2 * np.pi)


def test_bd_and_apriori_integrands_at_rest():
    state = rest_state()
    params = QnsParams(nu=1.0, kappa=1 / 11, eps=1e-3, r0=2.0, r1=1.0)
    bd = bd_dissipation(state, params)
    assert list(bd) == list(BD_KEYS)
    assert bd["bd_r0"] == pytest.approx(2.0 * 1e-3 * 2 * np.pi)
    assert all(value == pytest.approx(0.0, abs=1e-12) for key, value in bd.items() if key != "bd_r0")
    apriori = apriori_integrands(state, params)
    assert list(apriori) == list(APRIORI_KEYS)
    assert all(value == pytest.approx(0.0, abs=1e-12) for value in apriori.values())


def test_apriori_damping_integrands():
    state = random_state(3)
    params = QnsParams(nu=1.0, r0=0.5, r1=2.0)
    apriori = apriori_integrands(state, params)
    rho, u = state.rho.values, state.vel.values
    u_sq = np.sum(u ** 2, axis=0)
    assert apriori["apriori_r0_kinetic"] == pytest.approx(0.5 * integral(u_sq, state.grid))
    assert apriori["apriori_r1_quartic"] == pytest.approx(2.0 * integral(rho * u_sq ** 2, state.grid))


def test_mv_functional_of_the_effective_velocity():
    state = random_state(5)
    without_capillarity = to_w(state, QnsParams(nu=1.0))
    assert mv_functional_w(without_capillarity) == pytest.approx(mv_functional(state))
    with pytest.raises(FormulationError):
        mv_functional_w(state)


def test_closed_form_values():
    grid = Grid.cube(1, 64)
    below_one = State(ScalarField(grid, np.full(grid.shape, np.exp(-1.0))), VectorField.zeros(grid))
    assert bd_entropy(below_one, QnsParams(r0=1.0)) == pytest.approx(2 * np.pi)
    assert energy(rest_state(3, 16), QnsParams()) == pytest.approx(2 * (2 * np.pi) ** 3)
    shear = State(ScalarField(grid, np.ones(grid.shape)), VectorField(grid, np.sin(grid.coordinates[0])[np.newaxis]))
    assert energy_dissipation(shear, QnsParams(nu=1.0))["viscous"] == pytest.approx(np.pi)


def test_energy_parts_sum_to_energy():
    state = random_state(7)
    params = QnsParams(nu=1.0, kappa=1 / 11, eps=1e-3)
    parts = energy_parts(state, params)
    assert sum(parts.values()) == pytest.approx(energy(state, params))
    assert all(value >= 0 for value in parts.values())


def test_rest_state_does_not_dissipate():
    values = energy_dissipation(rest_state(2, 16), QnsParams(nu=1.0, kappa=0.05, r0=1.0, r1=1.0, eps=1e-3))
    assert set(values) == set(DISSIPATION_KEYS)
    for key in ("viscous", "damping_r0", "damping_r1", "eps_viscous", "eps_quartic", "bd_capillary", "bd_momentum"):
        assert values[key] == pytest.approx(0.0, abs=1e-14)


def test_mass_source_vanishes_without_eps_and_matches_constant_density():
    params = QnsParams(eps=1e-3, p0=4.0)
    assert mass_source(rest_state(), QnsParams()) == 0.0
    assert mass_source(rest_state(), params) == pytest.approx(1e-3 * 2 * np.pi)


def test_functionals_need_the_u_form():
    state = to_w(random_state(1), QnsParams(nu=1.0, kappa=0.05))
    with pytest.raises(FormulationError):
        energy(state, QnsParams(nu=1.0, kappa=0.05))
    with pytest.raises(FormulationError):
        mv_functional(state)


def test_monitor_record_carries_every_column():
    state = random_state(3)
    record = monitor_record(state, QnsParams(nu=1.0, kappa=1 / 11, eps=1e-3))
    row = record.as_row()
    assert len(row) == len(MonitorRecord.columns())
    assert record.finite
    assert set(record.integrands()) == set(ACCUMULATED_KEYS)
    again = MonitorRecord.from_row(dict(zip(MonitorRecord.columns(), row)))
    assert again.as_row() == row


@settings(max_examples=15)
@example(seed=0)
@given(st.integers(min_value=0, max_value=10_000))
def test_jungel_inequalities_hold(seed):
    rho = random_smooth_positive(Grid.cube(1, 128), seed, 2, 1.0, 0.25)
    for report in check_jungel(rho):
        assert report.passed, report.to_dict()
        assert report.margin >= 0


@settings(max_examples=10)
@given(st.integers(min_value=0, max_value=10_000))
def test_grad6_and_div_inequalities_hold_in_2d(seed):
    grid = Grid.cube(2, 48)
    rho = random_smooth_positive(grid, seed, 2, 1.0, 0.25)
    u = random_smooth_vector(grid, seed, 2)
    assert check_grad6(ScalarField(grid, np.sqrt(rho.values))).passed
    assert check_div_vs_D(rho, u).passed


def test_div_vs_D_for_separable_compression_in_3d():
    grid = Grid.cube(3, 16)
    x, y, z = grid.coordinates
    u = VectorField(grid, np.stack([np.sin(x), np.sin(y), np.sin(z)]))
    report = check_div_vs_D(ScalarField(grid, np.ones(grid.shape)), u)
    assert report.passed
    # cross terms of (div u)^2 integrate to zero
    assert report.lhs == pytest.approx(report.rhs / 3, rel=1e-10)


@pytest.mark.parametrize("r", [0.0, 2.0])
def test_flux_identity(r):
    rho = random_smooth_positive(Grid.cube(2, 48), 11, 2, 1.0, 0.25)
    report = check_flux_identity(ScalarField(rho.grid, np.sqrt(rho.values)), r)
    assert report.passed, report.detail


def test_flux_identity_rejects_negative_exponent():
    rho = random_smooth_positive(Grid.cube(1, 32), 0, 2, 1.0)
    with pytest.raises(InvalidArgument):
        check_flux_identity(rho, -1.0)


def test_product_rule_and_bd_momentum_identity():
    state = random_state(5, n=128)
    assert check_grad_sqrtrho_u(state.rho, state.vel).passed
    assert check_bd_momentum_identity(state.rho, state.vel).passed


def test_checks_refuse_vacuum():
    grid = Grid.cube(1, 16)
    rho = ScalarField(grid, np.zeros(grid.shape))
    with pytest.raises(VacuumError):
        check_div_vs_D(rho, VectorField.zeros(grid))


def test_report_semantics():
    assert FunctionalReport("a", 1.0, 2.0).passed
    assert FunctionalReport("a", 1.0, 2.0).margin == 1.0
    assert not FunctionalReport("a", 3.0, 2.0).passed
    assert not FunctionalReport("a", float("nan"), 2.0).passed
    assert FunctionalReport("a", 1.0).passed
    assert FunctionalReport("a", 1.0).margin is None
    assert agreement_report("same", 1.0, 1.0 + 1e-12).passed
    assert not agreement_report("apart", 1.0, 1.1).passed
