import dataclasses
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional

import numpy as np
from loguru import logger

# http://zetcode.com/python/prettytable/
from prettytable import PrettyTable  # pip install PTable

from qns.errors import AdmissibilityError, ConfigError, FormulationError, GridError, InvalidArgument, VacuumError
from qns.fieldkit import Differentiator, Grid, ScalarField, VectorField

PAPER_P0 = 50.0
PAPER_EPS_MAX = 1e-10
PAPER_SIGMA0 = 1e-10
DESK_P0 = 4.0
DESK_SIGMA0 = 0.05
MODES = ("desk", "paper")

# Relative slack on the 11 kappa <= nu test so that kappa = nu / 11 itself is admitted
CONSTRAINT_RTOL = 1e-12


def mu_of(nu: float, kappa: float) -> float:
    """ mu = nu - sqrt(nu^2 - kappa^2), evaluated as kappa^2 / (nu + sqrt(nu^2 - kappa^2)). """
    if kappa < 0 or nu < 0:
        raise InvalidArgument(f"nu and kappa must be nonnegative, got nu={nu}, kappa={kappa}")
    if kappa > nu:
        raise InvalidArgument(f"kappa={kappa} exceeds nu={nu}; mu would be complex")
    if kappa == 0:
        return 0.0
    return float(kappa ** 2 / (nu + np.sqrt(nu * nu - kappa * kappa)))


def mu_bound_holds(nu: float, kappa: float) -> bool:
    """ mu <= kappa^2 / nu """
    if nu == 0:
        return kappa == 0
    return mu_of(nu, kappa) <= kappa ** 2 / nu * (1 + CONSTRAINT_RTOL)


@dataclass(frozen=True)
class QnsParams:
    nu: float = 1.0
    kappa: float = 0.0
    gamma: float = 2.0
    a: float = 1.0
    r0: float = 0.0
    r1: float = 0.0
    eps: float = 0.0
    p0: float = DESK_P0
    sigma0: float = DESK_SIGMA0
    strict_mode: bool = False
    mode: str = "desk"

    def __post_init__(self):
        if self.nu < 0:
            raise InvalidArgument(f"nu must be nonnegative, got {self.nu}")
        if self.kappa < 0 or self.kappa > self.nu:
            raise InvalidArgument(f"Need 0 <= kappa <= nu, got kappa={self.kappa}, nu={self.nu}")
        if not self.gamma > 1:
            raise InvalidArgument(f"gamma must exceed 1, got {self.gamma}")
        if not self.a > 0:
            raise InvalidArgument(f"a must be positive, got {self.a}")
        if self.r0 < 0 or self.r1 < 0:
            raise InvalidArgument(f"Damping constants must be nonnegative, got r0={self.r0}, r1={self.r1}")
        if self.eps < 0:
            raise InvalidArgument(f"eps must be nonnegative, got {self.eps}")
        if not self.p0 > 0 or not self.sigma0 > 0:
            raise InvalidArgument(f"p0 and sigma0 must be positive, got p0={self.p0}, sigma0={self.sigma0}")
        if self.mode not in MODES:
            raise ConfigError(f"Unknown mode {self.mode!r}, choose one of {MODES}")
        if self.mode == "paper" and not 0 < self.eps <= PAPER_EPS_MAX:
            raise ConfigError(f"Paper mode requires 0 < eps <= {PAPER_EPS_MAX}, got eps={self.eps}")

    @property
    def mu(self) -> float:
        return mu_of(self.nu, self.kappa)

    @property
    def sqrt_eps(self) -> float:
        return float(np.sqrt(self.eps))

    def in_mode(self, mode: str) -> "QnsParams":
        if mode == "paper":
            return dataclasses.replace(self, mode=mode, p0=PAPER_P0, sigma0=PAPER_SIGMA0)
        return dataclasses.replace(self, mode=mode)

    def replace(self, **changes) -> "QnsParams":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, data: dict) -> "QnsParams":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown parameter keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(f"Invalid parameter block: {e}") from e

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["mu"] = self.mu
        return data


@dataclass()
class ConstraintCheck:
    inequality: str
    lhs: float
    rhs: float
    passed: bool
    informational: bool = False


@dataclass()
class ConstraintReport:
    checks: List[ConstraintCheck]
    strict_mode: bool

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.informational)

    def get(self, inequality: str) -> ConstraintCheck:
        for check in self.checks:
            if check.inequality == inequality:
                return check
        raise KeyError(inequality)

    @property
    def chain_holds(self) -> bool:
        """ 11 kappa <= nu with kappa > 0 must imply both derived inequalities. """
        if not self.get("11κ ≤ ν").passed or self.get("400μ² < κ²").informational:
            return True
        return self.get("20μ < ν").passed and self.get("400μ² < κ²").passed

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "strict_mode": self.strict_mode,
            "checks": [dataclasses.asdict(c) for c in self.checks],
        }

    def format_table(self) -> str:
        pretty_table = PrettyTable(field_names=["Inequality", "LHS", "RHS", "Status"])
        pretty_table.border = False
        for c in self.checks:
            status = "info" if c.informational else ("ok" if c.passed else "FAIL")
            pretty_table.add_row([c.inequality, f"{c.lhs:.6g}", f"{c.rhs:.6g}", status])
        return f"```md\n{pretty_table}```"


def check_constraints(params: QnsParams) -> ConstraintReport:
    nu, kappa, mu = params.nu, params.kappa, params.mu
    degenerate = kappa == 0
    checks = [
        ConstraintCheck("11κ ≤ ν", 11 * kappa, nu, 11 * kappa <= nu * (1 + CONSTRAINT_RTOL)),
        ConstraintCheck("20μ < ν", 20 * mu, nu, 20 * mu < nu, informational=nu == 0),
        ConstraintCheck("400μ² < κ²", 400 * mu * mu, kappa * kappa, 400 * mu * mu < kappa * kappa, degenerate),
        ConstraintCheck("1 < γ < 3", params.gamma, 3.0, 1 < params.gamma < 3),
    ]
    report = ConstraintReport(checks=checks, strict_mode=params.strict_mode)
    first = report.get("11κ ≤ ν")
    if not first.passed:
        if params.strict_mode:
            raise AdmissibilityError("11κ ≤ ν", f"11κ = {first.lhs!r} > ν = {first.rhs!r}")
        logger.warning(f"11κ ≤ ν fails: 11κ = {first.lhs}, ν = {nu}")
    return report


class Form(str, Enum):
    U = "u-form"
    W = "w-form"


def count_nonpositive(values: np.ndarray):
    bad = values <= 0
    return int(np.count_nonzero(bad)), float(np.min(values))


def require_positive(values: np.ndarray, where: str = "density"):
    count, lowest = count_nonpositive(values)
    if count or not np.isfinite(lowest):
        raise VacuumError(count, lowest, where)


@dataclass(frozen=True)
class State:
    rho: ScalarField
    vel: VectorField
    form: Form = Form.U
    time: float = 0.0

    def __post_init__(self):
        if self.rho.grid != self.vel.grid:
            raise GridError("Density and velocity live on different grids")
        object.__setattr__(self, "form", Form(self.form))
        require_positive(self.rho.values)

    @property
    def grid(self) -> Grid:
        return self.rho.grid

    def expect(self, form: Form) -> "State":
        if self.form != form:
            raise FormulationError(f"Expected a {form.value} state, got {self.form.value}")
        return self

    def with_values(self, rho: np.ndarray, vel: np.ndarray, time: Optional[float] = None) -> "State":
        return State(
            ScalarField(self.grid, rho), VectorField(self.grid, vel), self.form, self.time if time is None else time
        )


def _backend(grid: Grid, backend: Optional[Differentiator]) -> Differentiator:
    return grid.spectral if backend is None else backend


def bohm_values(rho: np.ndarray, form: str, d: Differentiator) -> np.ndarray:
    """ 2 rho grad(lap(sqrt rho) / sqrt rho) by one of three algebraically equivalent routes. """
    if form == "A":
        v = np.sqrt(rho)
        return 2 * rho * d.gradient(d.laplacian(v) / v)
    if form == "B":
        return d.divergence(rho * d.hessian(np.log(rho)))
    if form == "C":
        grad_v = d.gradient(np.sqrt(rho))
        outer = np.einsum("i...,j...->ij...", grad_v, grad_v)
        return d.gradient(d.laplacian(rho)) - 4 * d.divergence(outer)
    raise InvalidArgument(f"Unknown Bohm force form {form!r}, choose A, B or C")


def bohm_force(rho: ScalarField, form: str = "A", backend: Optional[Differentiator] = None) -> VectorField:
    require_positive(rho.values)
    return VectorField(rho.grid, bohm_values(rho.values, form, _backend(rho.grid, backend)))


def p_flux_values(v: np.ndarray, d: Differentiator) -> np.ndarray:
    grad_v = d.gradient(v)
    return np.sum(grad_v ** 2, axis=0) * grad_v


def p_flux(v: ScalarField, backend: Optional[Differentiator] = None) -> VectorField:
    """ |grad v|^2 grad v """
    return VectorField(v.grid, p_flux_values(v.values, _backend(v.grid, backend)))


def p_flux_div(v: ScalarField, backend: Optional[Differentiator] = None) -> ScalarField:
    d = _backend(v.grid, backend)
    return ScalarField(v.grid, d.divergence(p_flux_values(v.values, d)))


def log_gradient(rho: np.ndarray, d: Differentiator) -> np.ndarray:
    return d.gradient(np.log(rho))


def to_w(state: State, params: QnsParams, backend: Optional[Differentiator] = None) -> State:
    """ w = u + mu grad log rho """
    state.expect(Form.U)
    d = _backend(state.grid, backend)
    w = state.vel.values + params.mu * log_gradient(state.rho.values, d)
    return State(state.rho, VectorField(state.grid, w), Form.W, state.time)


def to_u(state: State, params: QnsParams, backend: Optional[Differentiator] = None) -> State:
    state.expect(Form.W)
    d = _backend(state.grid, backend)
    u = state.vel.values - params.mu * log_gradient(state.rho.values, d)
    return State(state.rho, VectorField(state.grid, u), Form.U, state.time)
