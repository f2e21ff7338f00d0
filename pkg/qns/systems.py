"""
Right-hand sides of the three formulations and the weak-form residual of a trajectory.

All formulations are evolved in nonconservative velocity form: the momentum terms are assembled as
rho * d_t(vel) and divided by rho at the end. Breakdown terms are kept raw; only the assembled rates are
dealiased.
"""
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from loguru import logger

from qns.errors import InvalidArgument
from qns.fieldkit import (
    Differentiator,
    Grid,
    ScalarField,
    VectorField,
    dealias_values,
    integral,
    symmetrize,
    trapezoid,
)
from qns.qnsops import Form, QnsParams, State, bohm_values, p_flux_values

TARGET = "target"
APPROX_U = "approx-u"
APPROX_W = "approx-w"

CONTINUITY_TERMS = ("transport", "mu_laplacian", "eps_pflux", "eps_negative_power")
MOMENTUM_TERMS = (
    "convection",
    "pressure",
    "viscous",
    "bohm",
    "mu_laplacian",
    "mu_density_gradient",
    "damping_r0",
    "damping_r1",
    "eps_viscous",
    "eps_bohm",
    "eps_pflux_convection",
    "eps_pflux_hessian",
    "eps_negative_power",
    "eps_cubic_drag",
    "eps_negative_power_gradient",
    "eps_pflux_gradient",
    "eps_pflux_log",
)

Terms = Dict[str, np.ndarray]


@dataclass()
class TermBreakdown:
    continuity: Terms = field(default_factory=dict)
    momentum: Terms = field(default_factory=dict)

    def continuity_total(self) -> np.ndarray:
        return sum(self.continuity.values())

    def momentum_total(self) -> np.ndarray:
        return sum(self.momentum.values())


@dataclass()
class Rhs:
    drho: ScalarField
    dvel: VectorField
    formulation: str
    breakdown: Optional[TermBreakdown] = None


def _directional(a: np.ndarray, jacobian: np.ndarray) -> np.ndarray:
    """ (a . grad) F with jacobian[i, j] = d_j F_i """
    return np.einsum("j...,ij...->i...", a, jacobian)


def _speed_sq(vel: np.ndarray) -> np.ndarray:
    return np.sum(vel ** 2, axis=0)


def _dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(a * b, axis=0)


def _contract(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sum(a * b, axis=(0, 1))


def _damping(rho: np.ndarray, u: np.ndarray, params: QnsParams) -> Terms:
    return {
        "damping_r0": -params.r0 * u,
        "damping_r1": -params.r1 * rho * _speed_sq(u) * u,
    }


def target_terms(rho: np.ndarray, u: np.ndarray, params: QnsParams, d: Differentiator) -> Tuple[Terms, Terms]:
    jacobian = d.gradient(u)
    continuity = {"transport": -d.divergence(rho * u)}
    momentum = {
        "convection": -rho * _directional(u, jacobian),
        "pressure": -d.gradient(params.a * rho ** params.gamma),
        "viscous": 2 * params.nu * d.divergence(rho * symmetrize(jacobian)),
        "bohm": params.kappa ** 2 * bohm_values(rho, "A", d),
    }
    momentum.update(_damping(rho, u, params))
    return continuity, momentum


def _zero_terms(labels: Sequence[str], like: np.ndarray) -> Terms:
    return {label: np.zeros_like(like) for label in labels}


APPROX_U_CONTINUITY_EPS = ("eps_pflux", "eps_negative_power")
APPROX_U_MOMENTUM_EPS = (
    "eps_viscous",
    "eps_bohm",
    "eps_pflux_convection",
    "eps_pflux_hessian",
    "eps_negative_power",
    "eps_cubic_drag",
    "eps_negative_power_gradient",
    "eps_pflux_gradient",
    "eps_pflux_log",
)


def approx_u_terms(rho: np.ndarray, u: np.ndarray, params: QnsParams, d: Differentiator) -> Tuple[Terms, Terms]:
    continuity, momentum = target_terms(rho, u, params, d)
    if params.eps == 0:
        continuity.update(_zero_terms(APPROX_U_CONTINUITY_EPS, rho))
        momentum.update(_zero_terms(APPROX_U_MOMENTUM_EPS, u))
        return continuity, momentum

    eps, sqrt_eps, mu = params.eps, params.sqrt_eps, params.mu
    v = np.sqrt(rho)
    flux = p_flux_values(v, d)
    flux_div = d.divergence(flux)
    negative_power = rho ** (-params.p0)
    log_hessian = d.hessian(np.log(rho))
    log_gradient = d.gradient(np.log(rho))
    w = u + mu * log_gradient
    jacobian = d.gradient(u)

    continuity["eps_pflux"] = eps * v * flux_div
    continuity["eps_negative_power"] = eps * negative_power
    momentum["eps_viscous"] = sqrt_eps * d.divergence(rho * jacobian)
    momentum["eps_bohm"] = sqrt_eps * mu * d.divergence(rho * log_hessian)
    momentum["eps_pflux_convection"] = eps * v * _directional(flux, jacobian)
    momentum["eps_pflux_hessian"] = eps * mu * v * _directional(flux, log_hessian)
    momentum["eps_negative_power"] = -eps * negative_power * u
    momentum["eps_cubic_drag"] = -(eps ** 1.5) * rho * _speed_sq(w) ** 1.5 * u
    momentum["eps_negative_power_gradient"] = -eps * mu * d.gradient(negative_power)
    momentum["eps_pflux_gradient"] = -eps * mu * d.gradient(v * flux_div)
    momentum["eps_pflux_log"] = eps * mu * v * flux_div * log_gradient
    return continuity, momentum


def approx_w_terms(rho: np.ndarray, w: np.ndarray, params: QnsParams, d: Differentiator) -> Tuple[Terms, Terms]:
    """ Effective-velocity form; no operator above second order is applied anywhere in here. """
    eps, sqrt_eps, mu, nu = params.eps, params.sqrt_eps, params.mu, params.nu
    u = w - mu * d.gradient(np.log(rho))
    jacobian = d.gradient(w)
    continuity = {
        "transport": -d.divergence(rho * w),
        "mu_laplacian": mu * d.laplacian(rho),
    }
    momentum = {
        "convection": -rho * _directional(w, jacobian),
        "pressure": -d.gradient(params.a * rho ** params.gamma),
        "viscous": 2 * (nu - mu) * d.divergence(rho * symmetrize(jacobian)),
        "mu_laplacian": mu * rho * d.laplacian(w),
        "mu_density_gradient": 2 * mu * _directional(d.gradient(rho), jacobian),
    }
    momentum.update(_damping(rho, u, params))
    if eps == 0:
        continuity.update(_zero_terms(("eps_pflux", "eps_negative_power"), rho))
        momentum.update(
            _zero_terms(("eps_viscous", "eps_pflux_convection", "eps_cubic_drag", "eps_negative_power"), w)
        )
        return continuity, momentum

    v = np.sqrt(rho)
    flux = p_flux_values(v, d)
    negative_power = rho ** (-params.p0)
    continuity["eps_pflux"] = eps * v * d.divergence(flux)
    continuity["eps_negative_power"] = eps * negative_power
    momentum["eps_viscous"] = sqrt_eps * d.divergence(rho * jacobian)
    momentum["eps_pflux_convection"] = eps * v * _directional(flux, jacobian)
    momentum["eps_cubic_drag"] = -(eps ** 1.5) * rho * _speed_sq(w) ** 1.5 * u
    momentum["eps_negative_power"] = -eps * negative_power * w
    return continuity, momentum


TermsFunction = Callable[[np.ndarray, np.ndarray, QnsParams, Differentiator], Tuple[Terms, Terms]]


@dataclass(frozen=True)
class LinearCoefficients:
    """ Constant-coefficient dissipative part: alpha lap(rho), beta_t / beta_l on transverse / longitudinal vel. """

    alpha: float
    beta_t: float
    beta_l: float


@dataclass(frozen=True)
class System:
    name: str
    form: Form
    terms: TermsFunction

    def assemble(
        self, rho: np.ndarray, vel: np.ndarray, params: QnsParams, d: Differentiator, dealias: bool = True
    ) -> Tuple[np.ndarray, np.ndarray, TermBreakdown]:
        continuity, momentum = self.terms(rho, vel, params, d)
        drho = sum(continuity.values())
        dvel = sum(momentum.values()) / rho
        if dealias:
            drho = dealias_values(drho, d.grid)
            dvel = dealias_values(dvel, d.grid)
        return drho, dvel, TermBreakdown(continuity, momentum)

    def rates(
        self, rho: np.ndarray, vel: np.ndarray, params: QnsParams, d: Differentiator, dealias: bool = True
    ) -> Tuple[np.ndarray, np.ndarray]:
        drho, dvel, _ = self.assemble(rho, vel, params, d, dealias)
        return drho, dvel

    def rhs(
        self,
        state: State,
        params: QnsParams,
        backend: Optional[Differentiator] = None,
        dealias: bool = True,
        breakdown: bool = False,
    ) -> Rhs:
        state.expect(self.form)
        d = state.grid.spectral if backend is None else backend
        drho, dvel, terms = self.assemble(state.rho.values, state.vel.values, params, d, dealias)
        return Rhs(
            ScalarField(state.grid, drho),
            VectorField(state.grid, dvel),
            self.name,
            terms if breakdown else None,
        )

    def linear_coefficients(self, params: QnsParams) -> LinearCoefficients:
        if self.name == TARGET:
            return LinearCoefficients(0.0, params.nu, 2 * params.nu)
        if self.name == APPROX_U:
            return LinearCoefficients(0.0, params.nu + params.sqrt_eps, 2 * params.nu + params.sqrt_eps)
        return LinearCoefficients(
            params.mu, params.nu + params.sqrt_eps, 2 * params.nu - params.mu + params.sqrt_eps
        )


SYSTEMS: Dict[str, System] = {
    TARGET: System(TARGET, Form.U, target_terms),
    APPROX_U: System(APPROX_U, Form.U, approx_u_terms),
    APPROX_W: System(APPROX_W, Form.W, approx_w_terms),
}


def get_system(name: str) -> System:
    if name not in SYSTEMS:
        raise InvalidArgument(f"Unknown system {name!r}, choose one of {sorted(SYSTEMS)}")
    return SYSTEMS[name]


def rhs_target(state: State, params: QnsParams, backend: Optional[Differentiator] = None, **kwargs) -> Rhs:
    return SYSTEMS[TARGET].rhs(state, params, backend, **kwargs)


def rhs_approx_u(state: State, params: QnsParams, backend: Optional[Differentiator] = None, **kwargs) -> Rhs:
    return SYSTEMS[APPROX_U].rhs(state, params, backend, **kwargs)


def rhs_approx_w(state: State, params: QnsParams, backend: Optional[Differentiator] = None, **kwargs) -> Rhs:
    return SYSTEMS[APPROX_W].rhs(state, params, backend, **kwargs)


def implied_u_rates(
    state_w: State, rhs_w: Rhs, params: QnsParams, backend: Optional[Differentiator] = None
) -> Tuple[ScalarField, VectorField]:
    """ Chain rule of w = u + mu grad log rho: d_t u = d_t w - mu grad(d_t rho / rho). """
    state_w.expect(Form.W)
    d = state_w.grid.spectral if backend is None else backend
    drho = rhs_w.drho.values
    du = rhs_w.dvel.values - params.mu * d.gradient(drho / state_w.rho.values)
    return rhs_w.drho, VectorField(state_w.grid, du)


@dataclass(frozen=True)
class TestFunction:
    """
    phi(x, t) = amplitude * psi(t) * e_component * trig(2 pi m . x / L) with psi(t) = cos^2(pi t / (2 T)).
    psi(0) = 1 and psi vanishes at the horizon T, so phi(., T) = 0.
    """

    __test__ = False

    mode: Tuple[int, ...]
    component: int = 0
    amplitude: float = 1.0
    kind: str = "cos"
    horizon: Optional[float] = None

    def spatial(self, grid: Grid) -> np.ndarray:
        if len(self.mode) != grid.dim or not 0 <= self.component < grid.dim:
            raise InvalidArgument(f"Test function {self} does not fit a {grid.dim}D grid")
        argument = sum(m * 2 * np.pi * x / extent for m, x, extent in zip(self.mode, grid.coordinates, grid.length))
        trig = np.cos(argument) if self.kind == "cos" else np.sin(argument)
        phi = np.zeros((grid.dim,) + grid.shape)
        phi[self.component] = self.amplitude * trig
        return phi

    def psi(self, t: float, horizon: float) -> float:
        return float(np.cos(np.pi * t / (2 * horizon)) ** 2)

    def dpsi(self, t: float, horizon: float) -> float:
        return float(-np.pi / (2 * horizon) * np.sin(np.pi * t / horizon))


def weak_integrand(
    state: State, phi: np.ndarray, psi: float, dpsi: float, params: QnsParams, d: Differentiator
) -> float:
    """ Space integral of the weak momentum form at one instant, for phi(x, t) = psi(t) phi(x). """
    rho, u = state.rho.values, state.vel.values
    grid = state.grid
    v = np.sqrt(rho)
    grad_phi = d.gradient(phi)
    div_phi = d.divergence(phi)
    grad_v = d.gradient(v)
    lap_v = d.laplacian(v)
    momentum = rho * u
    flux = np.einsum("i...,j...->ij...", momentum, u)
    shear = d.gradient(v * u) - np.einsum("i...,j...->ij...", u, grad_v)
    shear = shear + np.swapaxes(shear, 0, 1)
    density = (
        dpsi * _dot(momentum, phi)
        + psi * _contract(flux, grad_phi)
        + psi * params.a * rho ** params.gamma * div_phi
        - psi * params.nu * v * _contract(shear, grad_phi)
        - psi * params.r0 * _dot(u, phi)
        - psi * params.r1 * rho * _speed_sq(u) * _dot(u, phi)
        - psi * 4 * params.kappa ** 2 * lap_v * _dot(grad_v, phi)
        - psi * 2 * params.kappa ** 2 * lap_v * v * div_phi
    )
    return integral(density, grid)


def weak_residual(
    trajectory: Sequence[State],
    test_function: TestFunction,
    params: QnsParams,
    backend: Optional[Differentiator] = None,
) -> float:
    """
    |int m0 . phi(0) + int_0^T int (rho u . phi_t + rho u (x) u : grad phi + P div phi - viscous - damping - capillary)|
    with time integration by the trapezoid rule over the given snapshots.
    """
    if len(trajectory) < 2:
        raise InvalidArgument("Weak residual needs at least two snapshots")
    first = trajectory[0]
    grid = first.grid
    d = grid.spectral if backend is None else backend
    times = np.array([s.time for s in trajectory])
    if np.any(np.diff(times) <= 0):
        raise InvalidArgument("Snapshot times must be strictly increasing")
    horizon = test_function.horizon if test_function.horizon is not None else float(times[-1])
    phi = test_function.spatial(grid)

    values = []
    for state in trajectory:
        state.expect(Form.U)
        values.append(
            weak_integrand(
                state,
                phi,
                test_function.psi(state.time, horizon),
                test_function.dpsi(state.time, horizon),
                params,
                d,
            )
        )
    initial = test_function.psi(first.time, horizon) * integral(
        np.sum(first.rho.values * first.vel.values * phi, axis=0), grid
    )
    residual = initial + trapezoid(values, times)
    logger.debug(f"Weak residual {residual!r} over {len(trajectory)} snapshots, horizon {horizon}")
    return abs(residual)
