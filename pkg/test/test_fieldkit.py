import sys, os

sys.path.append(os.path.join(os.path.dirname(__file__), ".."))

import numpy as np
import pytest
from hypothesis import given, settings, example
import hypothesis.strategies as st
from numpy.testing import assert_allclose

from qns.errors import GridError, InvalidArgument
from qns.fieldkit import (
    Grid,
    ScalarField,
    TensorField,
    VectorField,
    dealias,
    derivative_order,
    div,
    div_tensor,
    grad,
    grad_vec,
    hessian,
    integrate,
    laplacian,
    low_pass,
    lp_norm,
    make_backend,
    random_smooth_positive,
    random_smooth_vector,
    sym_grad,
    track_order,
    trapezoid,
)


@pytest.mark.parametrize("n, length", [((7,), (1.0,)), ((6,), (1.0,)), ((8,), (0.0,)), ((8, 8, 8, 8), (1.0,) * 4)])
def test_grid_rejects_invalid_shapes(n, length):
    with pytest.raises(GridError):
        Grid(n, length)


def test_grid_geometry():
    grid = Grid((16, 32), (2.0, 4.0))
    assert grid.dim == 2
    assert grid.shape == (16, 32)
    assert grid.spacing == (0.125, 0.125)
    assert grid.volume == pytest.approx(8.0)
    assert grid.node_count == 512
    assert grid.k_max == pytest.approx(np.pi / 0.125)


def test_spectral_derivative_of_sine():
    grid = Grid.cube(1, 32)
    x = grid.coordinates[0]
    derivative = grid.spectral.first(np.sin(3 * x), 0)
    assert_allclose(derivative, 3 * np.cos(3 * x), atol=1e-12)


def test_nyquist_mode_has_no_first_derivative_but_keeps_second():
    grid = Grid.cube(1, 16)
    x = grid.coordinates[0]
    nyquist = np.cos(8 * x)
    assert_allclose(grid.spectral.first(nyquist, 0), 0, atol=1e-12)
    assert_allclose(grid.spectral.second_pure(nyquist, 0), -64 * nyquist, atol=1e-10)


@settings(max_examples=50)
@example(mode=0, amplitude=1.0)
@given(st.integers(min_value=0, max_value=15), st.floats(min_value=-10, max_value=10))
def test_rectangle_rule_integrates_trig_modes_exactly(mode, amplitude):
    grid = Grid.cube(1, 32)
    x = grid.coordinates[0]
    f = ScalarField(grid, amplitude * np.cos(mode * x))
    expected = amplitude * 2 * np.pi if mode == 0 else 0.0
    assert integrate(f) == pytest.approx(expected, abs=1e-10)


def test_gradient_convention_for_vectors():
    grid = Grid.cube(2, 16)
    x, y = grid.coordinates
    u = VectorField(grid, np.stack([np.sin(y), np.zeros(grid.shape)]))
    jacobian = grad_vec(u).values
    # jacobian[i, j] = d_j u_i
    assert_allclose(jacobian[0, 1], np.cos(y), atol=1e-12)
    assert_allclose(jacobian[0, 0], 0, atol=1e-12)
    assert_allclose(jacobian[1], 0, atol=1e-12)


def test_tensor_divergence_contracts_the_second_index():
    grid = Grid.cube(2, 16)
    x, y = grid.coordinates
    values = np.zeros((2, 2) + grid.shape)
    values[0, 1] = np.sin(y)
    result = div_tensor(TensorField(grid, values)).values
    assert_allclose(result[0], np.cos(y), atol=1e-12)
    assert_allclose(result[1], 0, atol=1e-12)


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_laplacian_equals_divergence_of_gradient(dim):
    grid = Grid.cube(dim, 16)
    f = random_smooth_positive(grid, seed=3, modes=2, floor=1.0)
    assert_allclose(laplacian(f).values, div(grad(f)).values, atol=1e-10)


def test_hessian_is_symmetric_and_traces_to_laplacian():
    grid = Grid.cube(2, 16)
    f = random_smooth_positive(grid, seed=5, modes=2, floor=1.0)
    h = hessian(f)
    assert h.symmetric
    assert_allclose(h.trace().values, laplacian(f).values, atol=1e-10)


def test_symmetric_flag_is_checked():
    grid = Grid.cube(2, 8)
    values = np.zeros((2, 2) + grid.shape)
    values[0, 1] = 1.0
    with pytest.raises(InvalidArgument):
        TensorField(grid, values, symmetric=True)


def test_sym_grad_splits_shear_evenly():
    grid = Grid.cube(2, 16)
    x, y = grid.coordinates
    u = VectorField(grid, np.stack([np.sin(y), np.zeros(grid.shape)]))
    d = sym_grad(u).values
    assert_allclose(d[0, 1], 0.5 * np.cos(y), atol=1e-12)
    assert_allclose(d[0, 1], d[1, 0])


def test_finite_difference_backend_is_second_order():
    errors = []
    for n in (32, 64):
        grid = Grid.cube(1, n)
        x = grid.coordinates[0]
        d = make_backend(grid, "finite-difference")
        errors.append(np.max(np.abs(d.first(np.sin(x), 0) - np.cos(x))))
    assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.05)


def test_unknown_backend():
    with pytest.raises(InvalidArgument):
        make_backend(Grid.cube(1, 8), "chebyshev")


def test_lp_norms():
    grid = Grid.cube(1, 32)
    f = ScalarField(grid, -2 * np.ones(grid.shape))
    assert lp_norm(f, 1) == pytest.approx(4 * np.pi)
    assert lp_norm(f, 2) == pytest.approx(2 * np.sqrt(2 * np.pi))
    assert lp_norm(f, np.inf) == 2.0
    with pytest.raises(InvalidArgument):
        lp_norm(f, 0.5)


def test_dealias_keeps_low_modes_and_removes_high_ones():
    grid = Grid.cube(1, 24)
    x = grid.coordinates[0]
    low, high = np.cos(8 * x), np.cos(9 * x)
    assert_allclose(dealias(ScalarField(grid, low + high)).values, low, atol=1e-12)


def test_low_pass_box_filter():
    grid = Grid.cube(1, 32)
    x = grid.coordinates[0]
    f = ScalarField(grid, 1 + np.sin(x) + np.sin(5 * x))
    assert_allclose(low_pass(f, 2).values, 1 + np.sin(x), atol=1e-12)


@settings(max_examples=30)
@given(st.integers(min_value=0, max_value=10_000))
def test_random_positive_fields_respect_floor_and_seed(seed):
    grid = Grid.cube(2, 16)
    first = random_smooth_positive(grid, seed, modes=2, floor=0.5, amplitude=0.25)
    again = random_smooth_positive(grid, seed, modes=2, floor=0.5, amplitude=0.25)
    assert np.min(first.values) >= 0.5
    assert np.array_equal(first.values, again.values)


def test_random_fields_differ_between_seeds():
    grid = Grid.cube(1, 32)
    a = random_smooth_vector(grid, 1, modes=3)
    b = random_smooth_vector(grid, 2, modes=3)
    assert not np.allclose(a.values, b.values)


def test_too_many_modes_would_alias():
    with pytest.raises(InvalidArgument):
        random_smooth_positive(Grid.cube(1, 16), 0, modes=6, floor=1.0)


def test_derivative_orders_are_traced():
    grid = Grid.cube(1, 16)
    d = grid.spectral
    f = track_order(1 + 0.1 * np.sin(grid.coordinates[0]))
    assert derivative_order(f) == 0
    assert derivative_order(d.laplacian(f)) == 2
    assert derivative_order(d.gradient(d.laplacian(f))) == 3
    assert derivative_order(np.sqrt(f) * d.gradient(f)) == 1
    assert derivative_order(d.laplacian(np.asarray(f))) == 0


def test_trapezoid_is_exact_for_linear_data():
    times = [0.0, 0.5, 2.0]
    assert trapezoid([1.0 + 3 * t for t in times], times) == pytest.approx(2.0 + 6.0)
