"""
Periodic grids, field containers, derivative operators, quadrature and smooth random fields.

Arrays follow one layout everywhere: a scalar lives in an array of the grid shape S, a vector in (d,)+S
and a tensor in (d, d)+S. The gradient of a vector is stored as T[i, j] = d_j F_i, so the divergence of a
tensor contracts the second index: (div T)_i = sum_j d_j T_ij.
"""
import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np

from qns.errors import GridError, InvalidArgument

TWO_PI = 2 * np.pi
MIN_NODES = 8


@dataclass(frozen=True)
class Grid:
    """ Uniform periodic lattice on [0, L_1) x ... x [0, L_d). """

    n: Tuple[int, ...]
    length: Tuple[float, ...]

    def __post_init__(self):
        n = tuple(int(x) for x in self.n)
        length = tuple(float(x) for x in self.length)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "length", length)
        if len(n) not in (1, 2, 3):
            raise GridError(f"Grid dimension must be 1, 2 or 3, got {len(n)}")
        if len(length) != len(n):
            raise GridError(f"Grid has {len(n)} node counts but {len(length)} extents")
        for count in n:
            if count < MIN_NODES or count % 2:
                raise GridError(f"Node count per axis must be even and >= {MIN_NODES}, got {count}")
        for extent in length:
            if not extent > 0 or not np.isfinite(extent):
                raise GridError(f"Domain extent must be positive and finite, got {extent}")

    @classmethod
    def cube(cls, dim: int, n: int, length: float = TWO_PI) -> "Grid":
        return cls((n,) * dim, (length,) * dim)

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.n

    @property
    def spacing(self) -> Tuple[float, ...]:
        return tuple(extent / count for extent, count in zip(self.length, self.n))

    @property
    def node_count(self) -> int:
        return int(np.prod(self.n))

    @property
    def volume(self) -> float:
        return float(np.prod(self.length))

    @cached_property
    def coordinates(self) -> Tuple[np.ndarray, ...]:
        axes = [np.arange(count) * h for count, h in zip(self.n, self.spacing)]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def mode_numbers(self, axis: int) -> np.ndarray:
        """ Integer Fourier modes in numpy fft order. """
        count = self.n[axis]
        return np.fft.fftfreq(count, d=1.0 / count)

    def wavenumbers(self, axis: int) -> np.ndarray:
        return self.mode_numbers(axis) * (TWO_PI / self.length[axis])

    def derivative_wavenumbers(self, axis: int) -> np.ndarray:
        # The Nyquist mode has no odd derivative on a real periodic grid
        k = self.wavenumbers(axis).copy()
        k[self.n[axis] // 2] = 0.0
        return k

    @cached_property
    def k_vectors(self) -> Tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*[self.derivative_wavenumbers(a) for a in range(self.dim)], indexing="ij"))

    @cached_property
    def k_squared(self) -> np.ndarray:
        full = np.meshgrid(*[self.wavenumbers(a) for a in range(self.dim)], indexing="ij")
        return sum(k ** 2 for k in full)

    @cached_property
    def k_max(self) -> float:
        return float(max(np.pi / h for h in self.spacing))

    def cutoff_mask(self, cutoff: float) -> np.ndarray:
        masks = np.meshgrid(*[np.abs(self.mode_numbers(a)) <= cutoff for a in range(self.dim)], indexing="ij")
        return np.logical_and.reduce(masks)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        masks = np.meshgrid(
            *[3 * np.abs(self.mode_numbers(a)) <= self.n[a] for a in range(self.dim)], indexing="ij"
        )
        return np.logical_and.reduce(masks)

    @cached_property
    def spectral(self) -> "Spectral":
        return Spectral(self)

    @cached_property
    def finite_difference(self) -> "FiniteDifference":
        return FiniteDifference(self)

    def to_dict(self) -> dict:
        return {"dim": self.dim, "n": list(self.n), "length": list(self.length)}


class OrderTracked(np.ndarray):
    """
    ndarray that remembers the highest derivative order applied anywhere upstream in its data flow.
    Plain arithmetic keeps the maximum order of its operands, derivative operators add their own order.
    """

    derivative_order = 0

    def __array_finalize__(self, obj):
        self.derivative_order = getattr(obj, "derivative_order", 0)

    def __array_ufunc__(self, ufunc, method, *inputs, **kwargs):
        order = _max_order(inputs)
        out = kwargs.get("out")
        if out is not None:
            kwargs["out"] = tuple(_strip(o) for o in out)
        result = getattr(ufunc, method)(*_strip(inputs), **kwargs)
        if out is not None:
            for target in out:
                if isinstance(target, OrderTracked):
                    target.derivative_order = max(target.derivative_order, order)
            return out[0] if len(out) == 1 else out
        return _wrap(result, order)

    def __array_function__(self, func, types, args, kwargs):
        order = max(_max_order(args), _max_order(tuple(kwargs.values())))
        result = func(*_strip(args), **_strip(kwargs))
        return _wrap(result, order)


def _max_order(items) -> int:
    best = 0
    for item in items:
        if isinstance(item, OrderTracked):
            best = max(best, item.derivative_order)
        elif isinstance(item, (list, tuple)):
            best = max(best, _max_order(item))
    return best


def _strip(obj):
    if isinstance(obj, OrderTracked):
        return obj.view(np.ndarray)
    if isinstance(obj, tuple):
        return tuple(_strip(x) for x in obj)
    if isinstance(obj, list):
        return [_strip(x) for x in obj]
    if isinstance(obj, dict):
        return {key: _strip(value) for key, value in obj.items()}
    return obj


def _wrap(result, order: int):
    if isinstance(result, tuple):
        return tuple(_wrap(x, order) for x in result)
    if isinstance(result, np.ndarray) and result.ndim > 0:
        result = result.view(OrderTracked)
        result.derivative_order = order
    return result


def track_order(values: np.ndarray) -> OrderTracked:
    """ Start tracing derivative orders from this array (order 0). """
    tracked = np.array(values, dtype=float).view(OrderTracked)
    tracked.derivative_order = 0
    return tracked


def derivative_order(values) -> int:
    return getattr(values, "derivative_order", 0)


def _tag(result: np.ndarray, source: np.ndarray, order: int) -> np.ndarray:
    if not isinstance(source, OrderTracked):
        return np.asarray(result)
    result = result.view(OrderTracked)
    result.derivative_order = source.derivative_order + order
    return result


class Differentiator:
    """ Periodic derivative operators acting on the trailing spatial axes of nodal arrays. """

    name = "abstract"

    def __init__(self, grid: Grid):
        self.grid = grid

    def _axis(self, f: np.ndarray, axis: int) -> int:
        return f.ndim - self.grid.dim + axis

    def first(self, f: np.ndarray, axis: int) -> np.ndarray:
        raise NotImplementedError

    def second_pure(self, f: np.ndarray, axis: int) -> np.ndarray:
        raise NotImplementedError

    def second(self, f: np.ndarray, a: int, b: int) -> np.ndarray:
        if a == b:
            return self.second_pure(f, a)
        return self.first(self.first(f, a), b)

    def gradient(self, f: np.ndarray) -> np.ndarray:
        """ Appends a derivative index in front of the spatial axes, so a vector yields T[i, j] = d_j F_i. """
        lead = f.ndim - self.grid.dim
        return np.stack([self.first(f, a) for a in range(self.grid.dim)], axis=lead)

    def divergence(self, F: np.ndarray) -> np.ndarray:
        """ Contracts the last non-spatial index against the derivative. """
        lead = F.ndim - self.grid.dim - 1
        if lead < 0:
            raise InvalidArgument("divergence needs at least one component index")
        return sum(self.first(np.take(F, a, axis=lead), a) for a in range(self.grid.dim))

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return sum(self.second_pure(f, a) for a in range(self.grid.dim))

    def hessian(self, f: np.ndarray) -> np.ndarray:
        dim = self.grid.dim
        blocks = {}
        for a in range(dim):
            for b in range(a, dim):
                blocks[(a, b)] = self.second(f, a, b)
        rows = [np.stack([blocks[(min(a, b), max(a, b))] for b in range(dim)]) for a in range(dim)]
        return np.stack(rows)


class Spectral(Differentiator):
    """ Fourier collocation derivatives. """

    name = "spectral"

    def _broadcast(self, k: np.ndarray, ndim: int, ax: int) -> np.ndarray:
        shape = [1] * ndim
        shape[ax] = k.size
        return k.reshape(shape)

    def first(self, f: np.ndarray, axis: int) -> np.ndarray:
        ax = self._axis(f, axis)
        k = self._broadcast(self.grid.derivative_wavenumbers(axis), f.ndim, ax)
        out = np.fft.ifft(1j * k * np.fft.fft(f, axis=ax), axis=ax).real
        return _tag(out, f, 1)

    def second_pure(self, f: np.ndarray, axis: int) -> np.ndarray:
        ax = self._axis(f, axis)
        k = self._broadcast(self.grid.wavenumbers(axis), f.ndim, ax)
        out = np.fft.ifft(-(k ** 2) * np.fft.fft(f, axis=ax), axis=ax).real
        return _tag(out, f, 2)


class FiniteDifference(Differentiator):
    """ Second-order centered differences, for cross-checking the spectral backend. """

    name = "finite-difference"

    def first(self, f: np.ndarray, axis: int) -> np.ndarray:
        ax = self._axis(f, axis)
        h = self.grid.spacing[axis]
        out = (np.roll(f, -1, axis=ax) - np.roll(f, 1, axis=ax)) / (2 * h)
        return _tag(out, f, 1)

    def second_pure(self, f: np.ndarray, axis: int) -> np.ndarray:
        ax = self._axis(f, axis)
        h = self.grid.spacing[axis]
        out = (np.roll(f, -1, axis=ax) - 2 * f + np.roll(f, 1, axis=ax)) / h ** 2
        return _tag(out, f, 2)


BACKENDS = {"spectral": Spectral, "finite-difference": FiniteDifference}


def make_backend(grid: Grid, name: str = "spectral") -> Differentiator:
    if name not in BACKENDS:
        raise InvalidArgument(f"Unknown derivative backend {name!r}, choose one of {sorted(BACKENDS)}")
    return getattr(grid, name.replace("-", "_"))


def _check_shape(grid: Grid, values: np.ndarray, lead: Tuple[int, ...], kind: str):
    expected = lead + grid.shape
    if values.shape != expected:
        raise GridError(f"{kind} values have shape {values.shape}, grid expects {expected}")


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asanyarray(self.values, dtype=float))
        _check_shape(self.grid, self.values, (), "Scalar field")

    def like(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values)


@dataclass(frozen=True)
class VectorField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asanyarray(self.values, dtype=float))
        _check_shape(self.grid, self.values, (self.grid.dim,), "Vector field")

    @classmethod
    def from_components(cls, components: Sequence[ScalarField]) -> "VectorField":
        grid = components[0].grid
        if any(c.grid != grid for c in components):
            raise GridError("Vector components live on different grids")
        return cls(grid, np.stack([c.values for c in components]))

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField":
        return cls(grid, np.zeros((grid.dim,) + grid.shape))

    @property
    def components(self) -> Tuple[ScalarField, ...]:
        return tuple(ScalarField(self.grid, c) for c in self.values)

    def norm_squared(self) -> ScalarField:
        return ScalarField(self.grid, np.sum(self.values ** 2, axis=0))


@dataclass(frozen=True)
class TensorField:
    grid: Grid
    values: np.ndarray
    symmetric: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", np.asanyarray(self.values, dtype=float))
        _check_shape(self.grid, self.values, (self.grid.dim, self.grid.dim), "Tensor field")
        if self.symmetric and not np.array_equal(self.values, np.swapaxes(self.values, 0, 1)):
            raise InvalidArgument("Tensor flagged symmetric but its components are not")

    def transpose(self) -> "TensorField":
        return TensorField(self.grid, np.swapaxes(self.values, 0, 1), self.symmetric)

    def trace(self) -> ScalarField:
        return ScalarField(self.grid, sum(self.values[a, a] for a in range(self.grid.dim)))


def _backend(grid: Grid, backend: Optional[Differentiator]) -> Differentiator:
    return grid.spectral if backend is None else backend


def grad(f: ScalarField, backend: Optional[Differentiator] = None) -> VectorField:
    return VectorField(f.grid, _backend(f.grid, backend).gradient(f.values))


def div(F: VectorField, backend: Optional[Differentiator] = None) -> ScalarField:
    return ScalarField(F.grid, _backend(F.grid, backend).divergence(F.values))


def div_tensor(T: TensorField, backend: Optional[Differentiator] = None) -> VectorField:
    return VectorField(T.grid, _backend(T.grid, backend).divergence(T.values))


def laplacian(f: ScalarField, backend: Optional[Differentiator] = None) -> ScalarField:
    return ScalarField(f.grid, _backend(f.grid, backend).laplacian(f.values))


def hessian(f: ScalarField, backend: Optional[Differentiator] = None) -> TensorField:
    return TensorField(f.grid, _backend(f.grid, backend).hessian(f.values), symmetric=True)


def grad_vec(F: VectorField, backend: Optional[Differentiator] = None) -> TensorField:
    return TensorField(F.grid, _backend(F.grid, backend).gradient(F.values))


def symmetrize(jacobian: np.ndarray) -> np.ndarray:
    return 0.5 * (jacobian + np.swapaxes(jacobian, 0, 1))


def sym_grad(F: VectorField, backend: Optional[Differentiator] = None) -> TensorField:
    """ D F = (grad F + grad F^T) / 2 """
    jacobian = _backend(F.grid, backend).gradient(F.values)
    return TensorField(F.grid, symmetrize(jacobian), symmetric=True)


def integral(values: np.ndarray, grid: Grid) -> float:
    """ Rectangle rule: mean nodal value times the domain volume. """
    return float(np.mean(values)) * grid.volume


def integrate(f: ScalarField) -> float:
    return integral(f.values, f.grid)


def lp_norm(f: ScalarField, p: float) -> float:
    if p == np.inf:
        return float(np.max(np.abs(f.values)))
    if not p >= 1:
        raise InvalidArgument(f"L^p norm needs p >= 1, got {p}")
    return integral(np.abs(f.values) ** p, f.grid) ** (1.0 / p)


def _spatial_axes(grid: Grid) -> Tuple[int, ...]:
    return tuple(range(-grid.dim, 0))


def filter_values(values: np.ndarray, grid: Grid, mask: np.ndarray) -> np.ndarray:
    axes = _spatial_axes(grid)
    return np.fft.ifftn(np.fft.fftn(values, axes=axes) * mask, axes=axes).real


def dealias_values(values: np.ndarray, grid: Grid) -> np.ndarray:
    """ 2/3 rule: keep |m| <= n/3 on every axis. """
    return filter_values(values, grid, grid.dealias_mask)


def dealias(f: ScalarField) -> ScalarField:
    return f.like(dealias_values(f.values, f.grid))


def low_pass(f: ScalarField, cutoff: float) -> ScalarField:
    return f.like(filter_values(f.values, f.grid, f.grid.cutoff_mask(cutoff)))


def _check_modes(grid: Grid, modes: int):
    if modes < 0:
        raise InvalidArgument(f"modes must be nonnegative, got {modes}")
    if 3 * modes > min(grid.n):
        raise InvalidArgument(f"modes={modes} exceeds n/3 for grid {grid.n}; field would alias")


def _trig_series(grid: Grid, rng: np.random.Generator, modes: int, amplitude: Optional[float]) -> np.ndarray:
    phases = [TWO_PI * x / extent for x, extent in zip(grid.coordinates, grid.length)]
    series = np.zeros(grid.shape)
    for index in itertools.product(range(-modes, modes + 1), repeat=grid.dim):
        weight = 1.0 / (1.0 + sum(m * m for m in index))
        a, b = rng.standard_normal(2) * weight
        argument = sum(m * phase for m, phase in zip(index, phases))
        series += a * np.cos(argument) + b * np.sin(argument)
    if amplitude is not None:
        rms = float(np.sqrt(np.mean(series ** 2)))
        if rms > 0:
            series *= amplitude / rms
    return series


def random_smooth_field(grid: Grid, seed: int, modes: int, amplitude: Optional[float] = None) -> ScalarField:
    """ Signed trigonometric polynomial with coefficients ~ N(0, 1) / (1 + |m|^2). """
    _check_modes(grid, modes)
    rng = np.random.default_rng(seed)
    return ScalarField(grid, _trig_series(grid, rng, modes, amplitude))


def random_smooth_vector(grid: Grid, seed: int, modes: int, amplitude: Optional[float] = None) -> VectorField:
    _check_modes(grid, modes)
    components = [_trig_series(grid, np.random.default_rng([seed, a]), modes, amplitude) for a in range(grid.dim)]
    return VectorField(grid, np.stack(components))


def random_smooth_positive(
    grid: Grid, seed: int, modes: int, floor: float, amplitude: Optional[float] = None
) -> ScalarField:
    """ floor + s^2 for a random smooth s; bounded below by floor and reproducible per seed. """
    if not floor > 0:
        raise InvalidArgument(f"floor must be positive, got {floor}")
    s = random_smooth_field(grid, seed, modes, amplitude)
    return s.like(floor + s.values ** 2)


def as_values(field: Union[ScalarField, VectorField, TensorField, np.ndarray]) -> np.ndarray:
    return field.values if hasattr(field, "values") else np.asanyarray(field)


def same_grid(fields: Iterable) -> Grid:
    grids = {f.grid for f in fields}
    if len(grids) != 1:
        raise GridError("Fields live on different grids")
    return grids.pop()


def trapezoid(values: Sequence[float], times: Sequence[float]) -> float:
    return float(np.trapz(np.asarray(values, dtype=float), np.asarray(times, dtype=float)))
