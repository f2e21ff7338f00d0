"""
Scalar functionals of a state: energy, BD entropy, Mellet-Vasseur, dissipation integrands, and the
functional inequality / identity checkers. Everything here is an instantaneous quadrature; time
integration belongs to the time loop.
"""
import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Tuple

import numpy as np

from qns.errors import InvalidArgument
from qns.fieldkit import Differentiator, ScalarField, VectorField, integral, symmetrize
from qns.qnsops import Form, QnsParams, State, require_positive

DEFAULT_REL_TOL = 1e-10
DEFAULT_ABS_TOL = 1e-12
IDENTITY_TOL = 1e-8

MONITOR_COLUMNS = (
    "time",
    "mass",
    "energy",
    "bd_entropy",
    "mv",
    "rho_min",
    "rho_max",
    "mass_balance_residual",
)
DISSIPATION_KEYS = (
    "viscous",
    "damping_r0",
    "damping_r1",
    "eps_viscous",
    "eps_quartic",
    "eps_quartic_kinetic",
    "eps_negative_power_kinetic",
    "eps_drag",
    "eps_capillary",
    "bd_capillary",
    "bd_pressure",
    "bd_momentum",
)
BD_KEYS = (
    "bd_kinetic_gradient",
    "bd_pressure_gradient",
    "bd_log_hessian",
    "bd_eps_flux",
    "bd_eps2_flux",
    "bd_eps_grad6",
    "bd_r0",
    "bound_rho_w5",
    "bound_rho_u5",
    "bound_grad6",
    "bound_grad5",
)
APRIORI_KEYS = (
    "apriori_r0_kinetic",
    "apriori_r1_quartic",
    "apriori_capillary",
    "apriori_r1_kappa_momentum",
    "apriori_pressure_gradient",
)
# Integrands accumulated in time by the trajectory
ACCUMULATED_KEYS = DISSIPATION_KEYS + BD_KEYS + APRIORI_KEYS
EXTRA_KEYS = ("energy_capillary", "budget_energy", "mv_w") + BD_KEYS + APRIORI_KEYS
ENERGY_PARTS = ("kinetic", "mass", "pressure", "eps_negative_power", "capillary", "eps_quartic")


@dataclass()
class FunctionalReport:
    name: str
    lhs: float
    rhs: Optional[float] = None
    rel_tol: float = DEFAULT_REL_TOL
    abs_tol: float = DEFAULT_ABS_TOL
    detail: Dict[str, float] = field(default_factory=dict)

    @property
    def margin(self) -> Optional[float]:
        if self.rhs is None:
            return None
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        if self.rhs is None:
            return bool(np.isfinite(self.lhs))
        if not (np.isfinite(self.lhs) and np.isfinite(self.rhs)):
            return False
        return self.lhs <= self.rhs * (1 + self.rel_tol) + self.abs_tol

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["margin"] = self.margin
        data["passed"] = self.passed
        return data


def agreement_report(name: str, left: float, right: float, tolerance: float = IDENTITY_TOL) -> FunctionalReport:
    """ Equality check: relative discrepancy of two quadratures against a tolerance. """
    scale = max(abs(left), abs(right), DEFAULT_ABS_TOL)
    return FunctionalReport(
        name, abs(left - right) / scale, tolerance, rel_tol=0.0, abs_tol=0.0, detail={"left": left, "right": right}
    )


@dataclass()
class MonitorRecord:
    time: float
    mass: float
    energy: float
    bd_entropy: float
    mv: float
    rho_min: float
    rho_max: float
    mass_balance_residual: float = 0.0
    dissipation: Dict[str, float] = field(default_factory=dict)
    extras: Dict[str, float] = field(default_factory=dict)

    @staticmethod
    def columns() -> Tuple[str, ...]:
        return MONITOR_COLUMNS + DISSIPATION_KEYS + EXTRA_KEYS

    def as_row(self) -> List[float]:
        head = [getattr(self, name) for name in MONITOR_COLUMNS]
        return head + [self.dissipation[k] for k in DISSIPATION_KEYS] + [self.extras[k] for k in EXTRA_KEYS]

    @classmethod
    def from_row(cls, row: Dict[str, float]) -> "MonitorRecord":
        return cls(
            **{name: float(row[name]) for name in MONITOR_COLUMNS},
            dissipation={k: float(row[k]) for k in DISSIPATION_KEYS},
            extras={k: float(row[k]) for k in EXTRA_KEYS if k in row},
        )

    def integrands(self) -> Dict[str, float]:
        values = dict(self.dissipation)
        values.update({k: self.extras[k] for k in BD_KEYS + APRIORI_KEYS})
        return values

    @property
    def finite(self) -> bool:
        return all(np.isfinite(x) for x in self.as_row())


class Kinematics:
    """ Lazily derived nodal quantities of one (rho, u) pair, shared by the functionals. """

    def __init__(self, rho: np.ndarray, u: np.ndarray, params: QnsParams, d: Differentiator):
        require_positive(rho)
        self.rho = rho
        self.u = u
        self.params = params
        self.d = d
        self.grid = d.grid

    def quad(self, values: np.ndarray) -> float:
        return integral(values, self.grid)

    @cached_property
    def v(self) -> np.ndarray:
        return np.sqrt(self.rho)

    @cached_property
    def grad_v(self) -> np.ndarray:
        return self.d.gradient(self.v)

    @cached_property
    def grad_v_sq(self) -> np.ndarray:
        return np.sum(self.grad_v ** 2, axis=0)

    @cached_property
    def hess_v(self) -> np.ndarray:
        return self.d.hessian(self.v)

    @cached_property
    def hess_v_sq(self) -> np.ndarray:
        return np.sum(self.hess_v ** 2, axis=(0, 1))

    @cached_property
    def hess_grad_v(self) -> np.ndarray:
        return np.einsum("ij...,j...->i...", self.hess_v, self.grad_v)

    @cached_property
    def hess_grad_v_sq(self) -> np.ndarray:
        return np.sum(self.hess_grad_v ** 2, axis=0)

    @cached_property
    def grad_abs_grad_v_sq(self) -> np.ndarray:
        """ |grad |grad v||^2 = |H grad v|^2 / |grad v|^2, taken as 0 where grad v vanishes. """
        out = np.zeros_like(self.grad_v_sq)
        positive = self.grad_v_sq > 0
        out[positive] = self.hess_grad_v_sq[positive] / self.grad_v_sq[positive]
        return out

    @cached_property
    def jac_u(self) -> np.ndarray:
        return self.d.gradient(self.u)

    @cached_property
    def jac_u_sq(self) -> np.ndarray:
        return np.sum(self.jac_u ** 2, axis=(0, 1))

    @cached_property
    def sym_u_sq(self) -> np.ndarray:
        return np.sum(symmetrize(self.jac_u) ** 2, axis=(0, 1))

    @cached_property
    def u_sq(self) -> np.ndarray:
        return np.sum(self.u ** 2, axis=0)

    @cached_property
    def log_hessian_sq(self) -> np.ndarray:
        return np.sum(self.d.hessian(np.log(self.rho)) ** 2, axis=(0, 1))

    @cached_property
    def w(self) -> np.ndarray:
        return self.u + self.params.mu * self.d.gradient(np.log(self.rho))

    @cached_property
    def w_abs(self) -> np.ndarray:
        return np.sqrt(np.sum(self.w ** 2, axis=0))

    @cached_property
    def negative_power(self) -> np.ndarray:
        return self.rho ** (-self.params.p0)

    @cached_property
    def grad_sqrt_rho_u(self) -> np.ndarray:
        return self.d.gradient(self.v * self.u)

    @cached_property
    def bd_momentum_tensor(self) -> np.ndarray:
        """ grad(sqrt(rho) u) - u (x) grad sqrt(rho) """
        return self.grad_sqrt_rho_u - np.einsum("i...,j...->ij...", self.u, self.grad_v)

    @cached_property
    def quarter_gradient_sq(self) -> np.ndarray:
        return np.sum(self.d.gradient(self.rho ** 0.25) ** 2, axis=0)

    @cached_property
    def pressure_gradient_sq(self) -> np.ndarray:
        return np.sum(self.d.gradient(self.rho ** (self.params.gamma / 2)) ** 2, axis=0)


def kinematics(state: State, params: QnsParams, backend: Optional[Differentiator] = None) -> Kinematics:
    state.expect(Form.U)
    d = state.grid.spectral if backend is None else backend
    return Kinematics(state.rho.values, state.vel.values, params, d)


def _parts(k: Kinematics) -> Dict[str, float]:
    p = k.params
    return {
        "kinetic": k.quad(k.rho * k.u_sq),
        "mass": k.quad(k.rho),
        "pressure": k.quad(k.rho ** p.gamma),
        "eps_negative_power": p.eps * k.quad(k.negative_power),
        "capillary": (2 * p.kappa ** 2 + 2 * p.mu * p.sqrt_eps) * k.quad(k.grad_v_sq),
        "eps_quartic": p.eps * p.mu * k.quad(k.grad_v_sq ** 2),
    }


def energy_parts(state: State, params: QnsParams, backend: Optional[Differentiator] = None) -> Dict[str, float]:
    """ The energy bracket split into its named pieces, see ENERGY_PARTS. """
    return _parts(kinematics(state, params, backend))


def energy(state: State, params: QnsParams, backend: Optional[Differentiator] = None) -> float:
    return sum(energy_parts(state, params, backend).values())


def _budget_energy(k: Kinematics) -> float:
    p = k.params
    density = 0.5 * k.rho * k.u_sq + p.a * k.rho ** p.gamma / (p.gamma - 1) + 2 * p.kappa ** 2 * k.grad_v_sq
    return k.quad(density)


def budget_energy(state: State, params: QnsParams, backend: Optional[Differentiator] = None) -> float:
    """ Kinetic + internal + capillary energy, the functional balanced exactly by the dissipation budget. """
    return _budget_energy(kinematics(state, params, backend))


def _bd_entropy(k: Kinematics) -> float:
    p = k.params
    log_minus = np.minimum(np.log(k.rho), 0.0)
    return k.quad(k.grad_v_sq + p.eps * k.grad_v_sq ** 2 - p.r0 * log_minus)


def bd_entropy(state: State, params: QnsParams, backend: Optional[Differentiator] = None) -> float:
    return _bd_entropy(kinematics(state, params, backend))


def _mv(rho: np.ndarray, vel_sq: np.ndarray, grid) -> float:
    s = np.e + vel_sq
    return integral(rho * s * np.log(s), grid)


def mv_functional(state: State) -> float:
    """ int rho (e + |u|^2) ln(e + |u|^2) """
    state.expect(Form.U)
    require_positive(state.rho.values)
    return _mv(state.rho.values, np.sum(state.vel.values ** 2, axis=0), state.grid)


def mv_functional_w(state: State) -> float:
    state.expect(Form.W)
    return _mv(state.rho.values, np.sum(state.vel.values ** 2, axis=0), state.grid)


def _dissipation(k: Kinematics) -> Dict[str, float]:
    p = k.params
    capillary_weight = (2 * p.kappa ** 2 + 2 * p.mu * p.sqrt_eps) * p.eps
    eps_capillary = 0.0
    if capillary_weight:
        eps_capillary = capillary_weight * k.quad(
            k.grad_v_sq * k.hess_v_sq
            + 4 * k.hess_grad_v_sq
            + (2 * p.p0 + 1) * k.grad_v_sq * k.v ** (-2 * p.p0 - 2)
        )
    return {
        "viscous": p.nu * k.quad(k.rho * k.sym_u_sq),
        "damping_r0": p.r0 * k.quad(k.u_sq),
        "damping_r1": p.r1 * k.quad(k.rho * k.u_sq ** 2),
        "eps_viscous": p.sqrt_eps * k.quad(k.rho * k.jac_u_sq),
        "eps_quartic": p.eps * k.quad(k.grad_v_sq ** 2),
        "eps_quartic_kinetic": p.eps * k.quad(k.grad_v_sq ** 2 * k.u_sq),
        "eps_negative_power_kinetic": p.eps * k.quad(k.negative_power * k.u_sq),
        "eps_drag": p.eps ** 1.5 * k.quad(k.rho * k.w_abs ** 3 * k.u_sq),
        "eps_capillary": eps_capillary,
        "bd_capillary": p.kappa ** 2 * k.quad(k.rho * k.log_hessian_sq),
        "bd_pressure": k.quad(k.pressure_gradient_sq),
        "bd_momentum": k.quad(np.sum(k.bd_momentum_tensor ** 2, axis=(0, 1))),
    }


def energy_dissipation(state: State, params: QnsParams, backend: Optional[Differentiator] = None) -> Dict[str, float]:
    """ Instantaneous dissipation integrands keyed by DISSIPATION_KEYS. """
    return _dissipation(kinematics(state, params, backend))


def _bd_dissipation(k: Kinematics) -> Dict[str, float]:
    p = k.params
    g2 = k.grad_v_sq
    rho_power = k.rho ** (-p.p0 - 1)
    v_inv2_grad6 = k.quad(g2 ** 3 / k.v ** 2)
    return {
        "bd_kinetic_gradient": k.quad(k.rho * k.jac_u_sq),
        "bd_pressure_gradient": k.quad(k.rho ** (p.gamma - 2) * np.sum(k.d.gradient(k.rho) ** 2, axis=0)),
        "bd_log_hessian": (p.kappa ** 2 + p.sqrt_eps * p.mu) * k.quad(k.rho * k.log_hessian_sq),
        "bd_eps_flux": p.eps * p.nu * k.quad(g2 * k.hess_v_sq + g2 * k.grad_abs_grad_v_sq + rho_power * g2),
        "bd_eps2_flux": p.eps ** 2 * k.quad(g2 ** 2 * k.hess_v_sq + g2 ** 2 * k.grad_abs_grad_v_sq + rho_power * g2 ** 2),
        "bd_eps_grad6": p.eps * p.mu * v_inv2_grad6,
        "bd_r0": p.r0 * p.eps * k.quad(g2 ** 2 / k.v ** 2 + rho_power),
        "bound_rho_w5": p.eps ** 1.5 * k.quad(k.rho * k.w_abs ** 5),
        "bound_rho_u5": p.eps ** 1.5 * k.quad(k.rho * k.u_sq ** 2.5),
        "bound_grad6": p.eps * v_inv2_grad6,
        "bound_grad5": p.eps * k.quad(g2 ** 2.5 / k.v ** 3),
    }


def bd_dissipation(state: State, params: QnsParams, backend: Optional[Differentiator] = None) -> Dict[str, float]:
    """ Integrands controlled by the BD entropy estimate plus the extra integrability bounds, keyed by BD_KEYS. """
    return _bd_dissipation(kinematics(state, params, backend))


def _apriori(k: Kinematics) -> Dict[str, float]:
    p = k.params
    return {
        "apriori_r0_kinetic": p.r0 * k.quad(k.u_sq),
        "apriori_r1_quartic": p.r1 * k.quad(k.rho * k.u_sq ** 2),
        "apriori_capillary": p.kappa ** 2 * k.quad(k.quarter_gradient_sq ** 2 + k.hess_v_sq),
        "apriori_r1_kappa_momentum": p.r1 * p.kappa * k.quad(np.sum(k.grad_sqrt_rho_u ** 2, axis=(0, 1))),
        "apriori_pressure_gradient": k.quad(k.pressure_gradient_sq),
    }


def apriori_integrands(state: State, params: QnsParams, backend: Optional[Differentiator] = None) -> Dict[str, float]:
    """ Time integrands of the uniform a-priori bounds, keyed by APRIORI_KEYS. """
    return _apriori(kinematics(state, params, backend))


def mass_source(state: State, params: QnsParams, backend: Optional[Differentiator] = None) -> float:
    """ eps int rho^-p0 - eps int |grad v|^4, the right side of the mass balance. """
    k = kinematics(state, params, backend)
    return _mass_source(k)


def _mass_source(k: Kinematics) -> float:
    p = k.params
    if not p.eps:
        return 0.0
    return p.eps * (k.quad(k.negative_power) - k.quad(k.grad_v_sq ** 2))


def monitor_record(
    state: State, params: QnsParams, backend: Optional[Differentiator] = None, mass_balance_residual: float = 0.0
) -> MonitorRecord:
    k = kinematics(state, params, backend)
    parts = _parts(k)
    extras = {
        "energy_capillary": parts["capillary"],
        "budget_energy": _budget_energy(k),
        "mv_w": _mv(k.rho, np.sum(k.w ** 2, axis=0), k.grid),
    }
    extras.update(_bd_dissipation(k))
    extras.update(_apriori(k))
    return MonitorRecord(
        time=state.time,
        mass=parts["mass"],
        energy=sum(parts.values()),
        bd_entropy=_bd_entropy(k),
        mv=_mv(k.rho, k.u_sq, k.grid),
        rho_min=float(np.min(k.rho)),
        rho_max=float(np.max(k.rho)),
        mass_balance_residual=mass_balance_residual,
        dissipation=_dissipation(k),
        extras=extras,
    )


def _backend_for(field, backend: Optional[Differentiator]) -> Differentiator:
    return field.grid.spectral if backend is None else backend


def check_jungel(
    rho: ScalarField, backend: Optional[Differentiator] = None
) -> Tuple[FunctionalReport, FunctionalReport]:
    """ int |grad rho^1/4|^4 <= 8 int rho |hess log rho|^2 and int |hess sqrt rho|^2 <= 7 int rho |hess log rho|^2 """
    d = _backend_for(rho, backend)
    k = Kinematics(rho.values, np.zeros((rho.grid.dim,) + rho.grid.shape), QnsParams(), d)
    weighted = k.quad(k.rho * k.log_hessian_sq)
    quarter = FunctionalReport("jungel_quarter", k.quad(k.quarter_gradient_sq ** 2), 8 * weighted)
    half = FunctionalReport("jungel_half", k.quad(k.hess_v_sq), 7 * weighted)
    return quarter, half


def check_grad6(v: ScalarField, backend: Optional[Differentiator] = None) -> FunctionalReport:
    """ int v^-2 |grad v|^6 <= 2 int |grad v|^2 |lap v|^2 + 8 int |grad |grad v|^2|^2 """
    d = _backend_for(v, backend)
    require_positive(v.values, "v")
    grad_v = d.gradient(v.values)
    g2 = np.sum(grad_v ** 2, axis=0)
    lap_v = d.laplacian(v.values)
    grad_g2 = d.gradient(g2)
    lhs = integral(g2 ** 3 / v.values ** 2, v.grid)
    rhs = 2 * integral(g2 * lap_v ** 2, v.grid) + 8 * integral(np.sum(grad_g2 ** 2, axis=0), v.grid)
    return FunctionalReport("grad6", lhs, rhs)


def check_div_vs_D(rho: ScalarField, u: VectorField, backend: Optional[Differentiator] = None) -> FunctionalReport:
    """ int rho (div u)^2 <= 3 int rho |D u|^2 """
    d = _backend_for(rho, backend)
    require_positive(rho.values)
    jac = d.gradient(u.values)
    divergence = sum(jac[a, a] for a in range(rho.grid.dim))
    lhs = integral(rho.values * divergence ** 2, rho.grid)
    rhs = 3 * integral(rho.values * np.sum(symmetrize(jac) ** 2, axis=(0, 1)), rho.grid)
    return FunctionalReport("div_vs_D", lhs, rhs)


def flux_identity_sides(v: ScalarField, r: float, backend: Optional[Differentiator] = None) -> Tuple[float, float]:
    if r < 0:
        raise InvalidArgument(f"Flux exponent r must be nonnegative, got {r}")
    d = _backend_for(v, backend)
    grad_v = d.gradient(v.values)
    hess_v = d.hessian(v.values)
    hess_grad_v = np.einsum("ij...,j...->i...", hess_v, grad_v)
    g2 = np.sum(grad_v ** 2, axis=0)
    g_r = g2 ** (r / 2)
    left = integral(d.divergence(g_r * grad_v) * d.divergence(g2 * grad_v), v.grid)
    right_density = (r + 2) * g_r * np.sum(hess_grad_v ** 2, axis=0) + g_r * g2 * np.sum(hess_v ** 2, axis=(0, 1))
    if r:
        quadratic = np.einsum("i...,i...->...", grad_v, hess_grad_v)
        weight = np.zeros_like(g2)
        positive = g2 > 0
        weight[positive] = g2[positive] ** ((r - 2) / 2)
        right_density = right_density + 2 * r * weight * quadratic ** 2
    return left, integral(right_density, v.grid)


def check_flux_identity(
    v: ScalarField, r: float, backend: Optional[Differentiator] = None, tolerance: float = IDENTITY_TOL
) -> FunctionalReport:
    """
    int div(|grad v|^r grad v) div(|grad v|^2 grad v)
      = int 2r |grad v|^(r-2) (grad v . H grad v)^2 + (r+2) |grad v|^r |H grad v|^2 + |grad v|^(r+2) |H|^2
    with H the Hessian of v.
    """
    left, right = flux_identity_sides(v, r, backend)
    return agreement_report(f"flux_identity_r{r:g}", left, right, tolerance)


def check_grad_sqrtrho_u(
    rho: ScalarField, u: VectorField, backend: Optional[Differentiator] = None, tolerance: float = IDENTITY_TOL
) -> FunctionalReport:
    """ grad(sqrt(rho) u) = sqrt(rho) grad u + 2 rho^1/4 u (x) grad rho^1/4, nodal max difference. """
    d = _backend_for(rho, backend)
    require_positive(rho.values)
    quarter = rho.values ** 0.25
    left = d.gradient(np.sqrt(rho.values) * u.values)
    right = np.sqrt(rho.values) * d.gradient(u.values) + 2 * quarter * np.einsum(
        "i...,j...->ij...", u.values, d.gradient(quarter)
    )
    difference = float(np.max(np.abs(left - right)))
    return FunctionalReport("grad_sqrtrho_u", difference, tolerance, rel_tol=0.0, abs_tol=0.0)


def check_bd_momentum_identity(
    rho: ScalarField, u: VectorField, backend: Optional[Differentiator] = None, tolerance: float = DEFAULT_REL_TOL
) -> FunctionalReport:
    """ int |grad(sqrt(rho) u) - u (x) grad sqrt(rho)|^2 = int rho |grad u|^2 """
    d = _backend_for(rho, backend)
    k = Kinematics(rho.values, u.values, QnsParams(), d)
    left = k.quad(np.sum(k.bd_momentum_tensor ** 2, axis=(0, 1)))
    right = k.quad(k.rho * k.jac_u_sq)
    return agreement_report("bd_momentum_identity", left, right, tolerance)
