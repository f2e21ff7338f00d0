import sys, os

sys.path.append(os.path.join(os.path.dirname(__file__), ".."))

import numpy as np
import pytest
from hypothesis import given, settings, example
import hypothesis.strategies as st
from numpy.testing import assert_allclose

from qns.errors import ConfigError, GridError, InvalidArgument
from qns.fieldkit import Grid, ScalarField, VectorField, lp_norm, random_smooth_field, random_smooth_vector
from qns.initdata import (
    SCENARIOS,
    RawData,
    get_scenario,
    load_raw,
    mollifier_cutoff,
    mollifier_floor,
    mollify,
    raw_to_state,
    scenario,
    validate_initial,
)
from qns.qnsops import QnsParams
from qns.snapshot import Snapshot, write_snapshot


def vacuum_raw(grid):
    return RawData(ScalarField(grid, np.zeros(grid.shape)), VectorField.zeros(grid))


def test_floor_on_full_vacuum_with_tiny_sigma0():
    grid = Grid.cube(1, 64)
    state = mollify(vacuum_raw(grid), 1e-2, QnsParams(sigma0=1e-10))
    assert_allclose(state.rho.values, 1 - 1.842068e-9, atol=1e-12)
    assert mollifier_floor(1e-2, 1e-10) == pytest.approx(1 - 1.842068e-9, abs=1e-12)
    assert_allclose(state.vel.values, 0)


def test_floor_is_negligible_for_positive_smooth_data():
    grid = Grid.cube(1, 128)
    rho0 = ScalarField(grid, 1 + 0.5 * np.sin(grid.coordinates[0]))
    raw = RawData(rho0, VectorField.zeros(grid))
    state = mollify(raw, 1e-2, QnsParams(sigma0=1.0))
    assert lp_norm(ScalarField(grid, state.rho.values - rho0.values), 1) < 1e-6


def test_mollified_vacuum_converges_to_the_raw_density():
    grid = Grid.cube(1, 128)
    raw = scenario("vacuum-bump-1d", grid)
    params = QnsParams(sigma0=0.5)
    distances = []
    for eps in (1e-2, 1e-3, 1e-4):
        state = mollify(raw, eps, params)
        distances.append(lp_norm(ScalarField(grid, state.rho.values - raw.rho0.values), 1))
    assert distances[0] > distances[1] > distances[2]


def test_mollifier_cutoff_is_capped_by_the_grid():
    grid = Grid.cube(1, 64)
    assert mollifier_cutoff(grid, 1e-2, 0.5) in (10, 11)
    assert mollifier_cutoff(grid, 1e-10, 1.0) == 21


@settings(max_examples=25)
@example(seed=0, eps=1e-2)
@given(st.integers(min_value=0, max_value=10_000), st.sampled_from([1e-1, 1e-2, 1e-3]))
def test_mollified_data_is_strictly_positive(seed, eps):
    grid = Grid.cube(1, 64)
    rho0 = np.maximum(0.0, random_smooth_field(grid, seed, 4).values)
    u0 = random_smooth_vector(grid, seed, 4).values
    raw = RawData(ScalarField(grid, rho0), VectorField(grid, rho0 * u0))
    params = QnsParams(sigma0=0.25)
    state = mollify(raw, eps, params)
    assert np.min(state.rho.values) >= mollifier_floor(eps, params.sigma0) * (1 - 1e-12)
    assert np.all(np.isfinite(state.vel.values))


def test_raw_data_validation():
    grid = Grid.cube(1, 16)
    rho = np.ones(grid.shape)
    rho[0] = -1.0
    with pytest.raises(InvalidArgument):
        RawData(ScalarField(grid, rho), VectorField.zeros(grid))
    momentum = np.ones((1,) + grid.shape)
    with pytest.raises(InvalidArgument):
        RawData(ScalarField(grid, np.zeros(grid.shape)), VectorField(grid, momentum))
    with pytest.raises(InvalidArgument):
        mollify(vacuum_raw(grid), 0.0, QnsParams())
    with pytest.raises(InvalidArgument):
        raw_to_state(vacuum_raw(grid))


@pytest.mark.parametrize("name", sorted(SCENARIOS))
def test_scenarios_generate_admissible_data(name):
    chosen = get_scenario(name)
    raw = scenario(name)
    assert raw.grid == chosen.recommended_grid()
    assert (raw.vacuum_nodes > 0) == chosen.needs_mollifier


def test_scenario_errors():
    with pytest.raises(ConfigError):
        get_scenario("kelvin-helmholtz")
    with pytest.raises(GridError):
        scenario("acoustic-1d", Grid.cube(2, 16))


def test_moving_scenario_velocity():
    grid = Grid.cube(1, 64)
    state = raw_to_state(scenario("moving-1d", grid))
    assert_allclose(state.vel.values[0], 0.5 * np.cos(grid.coordinates[0]), atol=1e-14)


def test_initial_report_of_uniform_rest():
    state = raw_to_state(scenario("uniform-rest"))
    report = validate_initial(state, QnsParams(r0=1.0, eps=1e-3), damping_free=True)
    values = report.to_dict()["values"]
    assert report.finite
    assert values["rho_L1"] == pytest.approx(2 * np.pi)
    assert values["r0_log_minus_rho_L1"] == 0.0
    assert values["eps_rho_negative_power_L1"] == pytest.approx(1e-3 * 2 * np.pi)
    assert values["sqrt_rho_L2.1"] == pytest.approx((2 * np.pi) ** (1 / 2.1))
    assert values["sqrt_rho_u_L2.1"] == 0.0
    assert "kinetic" in report.format_table()


def test_initial_report_flags_nonfinite_norms():
    grid = Grid.cube(1, 64)
    state = mollify(vacuum_raw(grid), 1e-2, QnsParams(sigma0=1.0, p0=200.0))
    report = validate_initial(state, QnsParams(sigma0=1.0, p0=200.0, eps=1e-2))
    assert not report.finite
    assert report.nonfinite == ["eps_rho_negative_power_L1"]


def test_load_raw_from_snapshots(tmp_path):
    grid = Grid.cube(1, 16)
    x = grid.coordinates[0]
    rho = 1 + 0.1 * np.sin(x)
    path = tmp_path / "velocity.snapshot"
    write_snapshot(path, Snapshot(grid, 0.0, "u-form", {"rho": rho, "u": np.cos(x)[np.newaxis]}))
    raw = load_raw(path)
    assert_allclose(raw.m0.values[0], rho * np.cos(x))

    path = tmp_path / "density.snapshot"
    write_snapshot(path, Snapshot(grid, 0.0, None, {"rho": rho}))
    assert np.all(load_raw(path).m0.values == 0)

    path = tmp_path / "empty.snapshot"
    write_snapshot(path, Snapshot(grid, 0.0, None, {"u": np.cos(x)[np.newaxis]}))
    with pytest.raises(ConfigError):
        load_raw(path)


def test_vacuum_bump_is_windowed():
    grid = Grid.cube(1, 128)
    x = grid.coordinates[0]
    rho = scenario("vacuum-bump-1d", grid).rho0.values
    assert rho[32] == pytest.approx(1.0)
    assert np.all(rho[x >= np.pi] == 0)
    assert np.all(rho <= np.maximum(0.0, np.sin(x)) ** 4 + 1e-15)
    edge = (x > 0) & (x < 0.1)
    assert np.all(rho[edge] < 1e-3 * np.sin(x[edge]) ** 4)
