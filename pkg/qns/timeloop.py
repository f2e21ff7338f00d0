"""
Time integration: IMEX (ARS(2,2,2), stiffly accurate, second order) and classical RK4, adaptive or fixed
steps, positivity guard, monitor accumulation and the discrete energy budget.
"""
import csv
import dataclasses
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import arrow
import numpy as np
from atomicwrites import atomic_write
from loguru import logger

# http://zetcode.com/python/prettytable/
from prettytable import PrettyTable  # pip install PTable

from qns.errors import ConfigError, InvalidArgument, PositivityFailure, StepUnderflow
from qns.fieldkit import Differentiator, Grid, ScalarField, integral, lp_norm, make_backend, trapezoid
from qns.functionals import (
    ACCUMULATED_KEYS,
    MonitorRecord,
    _budget_energy,
    _dissipation,
    kinematics,
    mass_source,
    monitor_record,
)
from qns.qnsops import Form, QnsParams, State, check_constraints, count_nonpositive, to_u, to_w
from qns.systems import APPROX_U, APPROX_W, LinearCoefficients, System, get_system

SCHEMES = ("imex", "rk4-explicit")
SCHEME_ALIASES = {"rk4": "rk4-explicit", "ars222": "imex"}

# ARS(2,2,2)
ARS_GAMMA = 1 - 1 / math.sqrt(2)
ARS_DELTA = 1 - 1 / (2 * ARS_GAMMA)

# Real-axis stability reach of the explicit parts
STABILITY_REACH = {"imex": 2.0, "rk4-explicit": 2.8}


@dataclass(frozen=True)
class IntegratorConfig:
    scheme: str = "imex"
    dt_init: float = 1e-3
    dt_min: float = 1e-10
    dt_max: float = 1e-2
    cfl_target: float = 0.5
    t_end: float = 1.0
    monitor_every: int = 1
    positivity_floor: float = 1e-8
    adaptive: bool = True
    system: str = APPROX_U
    backend: str = "spectral"
    dealias: bool = True

    def __post_init__(self):
        object.__setattr__(self, "scheme", SCHEME_ALIASES.get(self.scheme, self.scheme))
        if self.scheme not in SCHEMES:
            raise InvalidArgument(f"Unknown scheme {self.scheme!r}, choose one of {SCHEMES}")
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise InvalidArgument(
                f"Need 0 < dt_min <= dt_init <= dt_max, got {self.dt_min}, {self.dt_init}, {self.dt_max}"
            )
        if not self.t_end > 0:
            raise InvalidArgument(f"t_end must be positive, got {self.t_end}")
        if not 0 < self.cfl_target <= 1:
            raise InvalidArgument(f"cfl_target must lie in (0, 1], got {self.cfl_target}")
        if int(self.monitor_every) != self.monitor_every or self.monitor_every < 1:
            raise InvalidArgument(f"monitor_every must be a positive integer, got {self.monitor_every}")
        if not self.positivity_floor > 0:
            raise InvalidArgument(f"positivity_floor must be positive, got {self.positivity_floor}")

    @property
    def fixed_steps(self) -> int:
        return max(1, int(math.ceil(self.t_end / self.dt_init - 1e-9)))

    def replace(self, **changes) -> "IntegratorConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_dict(cls, data: dict) -> "IntegratorConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown integrator keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


class Status(str, Enum):
    COMPLETED = "completed"
    POSITIVITY_FAILURE = "positivity-failure"
    STEP_UNDERFLOW = "step-underflow"


@dataclass()
class Trajectory:
    system: str
    params: QnsParams
    config: IntegratorConfig
    snapshots: List[State] = field(default_factory=list)
    records: List[MonitorRecord] = field(default_factory=list)
    dissipation: Dict[str, float] = field(default_factory=lambda: {k: 0.0 for k in ACCUMULATED_KEYS})
    status: Status = Status.COMPLETED
    message: str = ""
    steps: int = 0

    @property
    def completed(self) -> bool:
        return self.status == Status.COMPLETED

    @property
    def final(self) -> State:
        return self.snapshots[-1]

    @property
    def times(self) -> List[float]:
        return [s.time for s in self.snapshots]

    @property
    def rho_band(self) -> Tuple[float, float]:
        return min(r.rho_min for r in self.records), max(r.rho_max for r in self.records)

    def u_snapshots(self) -> List[State]:
        return [to_u(s, self.params) if s.form == Form.W else s for s in self.snapshots]

    def summary(self) -> dict:
        low, high = self.rho_band
        return {
            "system": self.system,
            "status": self.status.value,
            "message": self.message,
            "steps": self.steps,
            "final_time": self.records[-1].time,
            "rho_band": [low, high],
            "final": dict(zip(MonitorRecord.columns(), self.records[-1].as_row())),
            "time_integrated": dict(self.dissipation),
            "sup": sup_over_time(self.records),
        }


def sup_over_time(records: Sequence[MonitorRecord]) -> Dict[str, float]:
    columns = MonitorRecord.columns()
    rows = np.array([r.as_row() for r in records])
    return {name: float(np.max(rows[:, i])) for i, name in enumerate(columns) if name != "time"}


class LinearPart:
    """
    Constant-coefficient dissipative operator, diagonal in Fourier space:
        L rho = alpha lap(rho),  L vel = beta_t lap(vel) + (beta_l - beta_t) grad div(vel)
    """

    def __init__(self, coefficients: LinearCoefficients, grid: Grid):
        self.coefficients = coefficients
        self.grid = grid
        self.axes = tuple(range(-grid.dim, 0))
        self.k = np.stack(grid.k_vectors)
        self.k2 = grid.k_squared
        self.kd2 = np.sum(self.k ** 2, axis=0)

    def _fft(self, values: np.ndarray) -> np.ndarray:
        return np.fft.fftn(values, axes=self.axes)

    def _ifft(self, values: np.ndarray) -> np.ndarray:
        return np.fft.ifftn(values, axes=self.axes).real

    def apply(self, rho: np.ndarray, vel: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        c = self.coefficients
        rho_hat = self._fft(rho)
        vel_hat = self._fft(vel)
        k_dot = np.sum(self.k * vel_hat, axis=0)
        l_vel = -c.beta_t * self.k2 * vel_hat - (c.beta_l - c.beta_t) * self.k * k_dot
        return self._ifft(-c.alpha * self.k2 * rho_hat), self._ifft(l_vel)

    def solve(self, weight: float, rho: np.ndarray, vel: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """ (I - weight L)^-1 by a rank-one update of the scalar transverse factor. """
        c = self.coefficients
        rho_hat = self._fft(rho) / (1 + weight * c.alpha * self.k2)
        vel_hat = self._fft(vel)
        a = 1 + weight * c.beta_t * self.k2
        b = weight * (c.beta_l - c.beta_t)
        k_dot = np.sum(self.k * vel_hat, axis=0)
        vel_hat = (vel_hat - b * self.k * k_dot / (a + b * self.kd2)) / a
        return self._ifft(rho_hat), self._ifft(vel_hat)


class Stepper:
    """ One integration context: system, parameters, backend and linear part for a grid. """

    def __init__(self, system: System, params: QnsParams, grid: Grid, config: IntegratorConfig):
        self.system = system
        self.params = params
        self.config = config
        self.d: Differentiator = make_backend(grid, config.backend)
        self.linear = LinearPart(system.linear_coefficients(params), grid)

    def rates(self, rho: np.ndarray, vel: np.ndarray, time: float) -> Tuple[np.ndarray, np.ndarray]:
        count, lowest = count_nonpositive(rho)
        if count:
            raise PositivityFailure(time, count, lowest, self.config.positivity_floor)
        return self.system.rates(rho, vel, self.params, self.d, self.config.dealias)

    def explicit(self, rho: np.ndarray, vel: np.ndarray, time: float) -> Tuple[np.ndarray, np.ndarray]:
        drho, dvel = self.rates(rho, vel, time)
        l_rho, l_vel = self.linear.apply(rho, vel)
        return drho - l_rho, dvel - l_vel

    def imex(self, rho: np.ndarray, vel: np.ndarray, t: float, dt: float) -> Tuple[np.ndarray, np.ndarray]:
        g, delta = ARS_GAMMA, ARS_DELTA
        e1_rho, e1_vel = self.explicit(rho, vel, t)
        y2_rho, y2_vel = self.linear.solve(g * dt, rho + g * dt * e1_rho, vel + g * dt * e1_vel)
        l2_rho, l2_vel = self.linear.apply(y2_rho, y2_vel)
        e2_rho, e2_vel = self.explicit(y2_rho, y2_vel, t + g * dt)
        return self.linear.solve(
            g * dt,
            rho + dt * (delta * e1_rho + (1 - delta) * e2_rho + (1 - g) * l2_rho),
            vel + dt * (delta * e1_vel + (1 - delta) * e2_vel + (1 - g) * l2_vel),
        )

    def rk4(self, rho: np.ndarray, vel: np.ndarray, t: float, dt: float) -> Tuple[np.ndarray, np.ndarray]:
        k1 = self.rates(rho, vel, t)
        k2 = self.rates(rho + 0.5 * dt * k1[0], vel + 0.5 * dt * k1[1], t + 0.5 * dt)
        k3 = self.rates(rho + 0.5 * dt * k2[0], vel + 0.5 * dt * k2[1], t + 0.5 * dt)
        k4 = self.rates(rho + dt * k3[0], vel + dt * k3[1], t + dt)
        return (
            rho + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
            vel + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
        )

    def advance(self, state: State, dt: float, new_time: Optional[float] = None) -> State:
        if not dt > 0:
            raise InvalidArgument(f"Time step must be positive, got {dt}")
        rho, vel = state.rho.values, state.vel.values
        if self.config.scheme == "imex":
            rho, vel = self.imex(rho, vel, state.time, dt)
        else:
            rho, vel = self.rk4(rho, vel, state.time, dt)
        time = state.time + dt if new_time is None else new_time
        count, lowest = count_nonpositive(rho - self.config.positivity_floor)
        if count or not np.all(np.isfinite(rho)):
            raise PositivityFailure(time, count, float(np.min(rho)), self.config.positivity_floor)
        return state.with_values(rho, vel, time)

    def cfl_step(self, state: State) -> float:
        grid = state.grid
        rho, vel = state.rho.values, state.vel.values
        p = self.params
        speed = float(np.max(np.sqrt(np.sum(vel ** 2, axis=0))))
        sound = float(np.sqrt(p.a * p.gamma * np.max(rho ** (p.gamma - 1))))
        k_max = grid.k_max
        limits = [min(grid.spacing) / max(speed + sound, 1e-300)]
        if p.kappa > 0:
            limits.append(1.0 / (p.kappa * k_max ** 2))
        diffusivity = 0.0
        if p.eps > 0:
            grad_v = self.d.gradient(np.sqrt(rho))
            diffusivity += 3 * p.eps * float(np.max(np.sum(grad_v ** 2, axis=0)))
        if self.config.scheme == "rk4-explicit":
            c = self.linear.coefficients
            diffusivity += max(c.alpha, c.beta_t, c.beta_l)
        if diffusivity > 0:
            limits.append(STABILITY_REACH[self.config.scheme] / (diffusivity * k_max ** 2))
        return min(self.config.cfl_target * min(limits), self.config.dt_max)


def step(
    state: State,
    params: QnsParams,
    system: Union[System, str],
    dt: float,
    config: Optional[IntegratorConfig] = None,
) -> State:
    """ Advance one step of the configured scheme; raises PositivityFailure when rho_min <= floor. """
    system = get_system(system) if isinstance(system, str) else system
    config = IntegratorConfig(system=system.name) if config is None else config
    state.expect(system.form)
    return Stepper(system, params, state.grid, config).advance(state, dt)


def _monitor(state: State, params: QnsParams, d: Differentiator, residual: float = 0.0) -> MonitorRecord:
    state_u = to_u(state, params, d) if state.form == Form.W else state
    record = monitor_record(state_u, params, d, residual)
    record.time = state.time
    return record


def _mass_source(state: State, params: QnsParams, d: Differentiator) -> float:
    state_u = to_u(state, params, d) if state.form == Form.W else state
    return mass_source(state_u, params, d)


def integrate(initial: State, params: QnsParams, config: IntegratorConfig) -> Trajectory:
    check_constraints(params)
    system = get_system(config.system)
    initial.expect(system.form)
    stepper = Stepper(system, params, initial.grid, config)
    d = stepper.d
    trajectory = Trajectory(system=system.name, params=params, config=config)
    started = arrow.utcnow()
    logger.info(
        f"Integrating {system.name} with {config.scheme} to t={config.t_end} on grid {initial.grid.n} "
        f"({'adaptive' if config.adaptive else 'fixed'} steps)"
    )

    state = initial
    source = _mass_source(state, params, d)
    trajectory.snapshots.append(state)
    trajectory.records.append(_monitor(state, params, d))
    fixed_dt = config.t_end / config.fixed_steps

    while state.time < config.t_end * (1 - 1e-14):
        try:
            if config.adaptive:
                dt = stepper.cfl_step(state)
                remaining = config.t_end - state.time
                if dt < config.dt_min and dt < remaining:
                    raise StepUnderflow(state.time, dt, config.dt_min)
                new_time = None
                if dt >= remaining:
                    dt, new_time = remaining, config.t_end
            else:
                dt = fixed_dt
                new_time = config.t_end if trajectory.steps + 1 == config.fixed_steps else (trajectory.steps + 1) * dt
            state = stepper.advance(state, dt, new_time)
        except PositivityFailure as e:
            trajectory.status = Status.POSITIVITY_FAILURE
            trajectory.message = str(e)
            logger.warning(f"Positivity failure: t={e.time}, nodes={e.count}, rho_min={e.rho_min}")
            break
        except StepUnderflow as e:
            trajectory.status = Status.STEP_UNDERFLOW
            trajectory.message = str(e)
            logger.warning(f"Step underflow at t={e.time}: dt={e.dt} < dt_min={e.dt_min}")
            break
        trajectory.steps += 1
        finished = state.time >= config.t_end * (1 - 1e-14)
        if trajectory.steps % config.monitor_every == 0 or finished:
            previous = trajectory.records[-1]
            interval = state.time - previous.time
            new_source = _mass_source(state, params, d)
            record = _monitor(state, params, d)
            record.mass_balance_residual = abs((record.mass - previous.mass) / interval - 0.5 * (source + new_source))
            for key, value in record.integrands().items():
                trajectory.dissipation[key] += 0.5 * interval * (previous.integrands()[key] + value)
            source = new_source
            trajectory.records.append(record)
            trajectory.snapshots.append(state)
            logger.debug(
                f"t={record.time:.6g} mass={record.mass:.12g} energy={record.energy:.8g} "
                f"rho=[{record.rho_min:.6g}, {record.rho_max:.6g}]"
            )

    logger.info(
        f"Run {trajectory.status.value} after {trajectory.steps} steps at t={state.time:.6g}, "
        f"started {started.humanize()}"
    )
    return trajectory


def energy_power(state: State, params: QnsParams, d: Optional[Differentiator] = None) -> Dict[str, float]:
    """
    Power balance of the budget energy for a u-form approximate state.
    chain: exact time derivative of the budget energy along the (raw) right-hand side.
    model: -dissipation + identified sources, assembled from the named dissipation integrands.
    """
    state.expect(Form.U)
    d = state.grid.spectral if d is None else d
    grid = state.grid
    rho, u = state.rho.values, state.vel.values
    system = get_system(APPROX_U)
    _, _, terms = system.assemble(rho, u, params, d, dealias=False)
    k = kinematics(state, params, d)

    speed_sq = k.u_sq
    enthalpy = params.a * params.gamma * rho ** (params.gamma - 1) / (params.gamma - 1)
    quantum = -2 * params.kappa ** 2 * d.laplacian(k.v) / k.v
    potential = 0.5 * speed_sq + enthalpy + quantum
    transport = terms.continuity["transport"]
    source = terms.continuity["eps_pflux"] + terms.continuity["eps_negative_power"]

    def work(label: str) -> float:
        return integral(np.sum(u * terms.momentum[label], axis=0), grid)

    chain = integral(potential * terms.continuity_total(), grid) + integral(
        np.sum(u * terms.momentum_total(), axis=0), grid
    )
    diss = _dissipation(k)
    dissipation = (
        2 * diss["viscous"]
        + diss["damping_r0"]
        + diss["damping_r1"]
        + diss["eps_viscous"]
        + diss["eps_negative_power_kinetic"]
        + diss["eps_drag"]
    )
    exchange = (
        integral(0.5 * speed_sq * transport, grid)
        + work("convection")
        + integral(enthalpy * transport, grid)
        + work("pressure")
        + integral(quantum * transport, grid)
        + work("bohm")
    )
    regularization = sum(
        work(label)
        for label in (
            "eps_bohm",
            "eps_pflux_convection",
            "eps_pflux_hessian",
            "eps_negative_power_gradient",
            "eps_pflux_gradient",
            "eps_pflux_log",
        )
    ) + integral(potential * source, grid)
    return {
        "chain": chain,
        "model": -dissipation + exchange + regularization,
        "dissipation": dissipation,
        "exchange": exchange,
        "regularization": regularization,
    }


@dataclass()
class EnergyBudgetReport:
    times: List[float]
    residuals: List[float]
    spatial_defect: float
    dt: float

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals))) if self.residuals else 0.0

    def to_dict(self) -> dict:
        return {
            "max_residual": self.max_residual,
            "spatial_defect": self.spatial_defect,
            "dt": self.dt,
            "times": self.times,
            "residuals": self.residuals,
        }


def energy_budget(trajectory: Trajectory, params: QnsParams) -> EnergyBudgetReport:
    """ Per-step residual of dE/dt + dissipation - sources, with the powers integrated by trapezoid. """
    if trajectory.config.monitor_every != 1:
        raise InvalidArgument("Energy budget needs a trajectory recorded at every step (monitor_every = 1)")
    states = trajectory.u_snapshots()
    d = make_backend(states[0].grid, trajectory.config.backend)
    energies, powers, defect = [], [], 0.0
    for state in states:
        k = kinematics(state, params, d)
        energies.append(_budget_energy(k))
        power = energy_power(state, params, d)
        powers.append(power["model"])
        defect = max(defect, abs(power["chain"] - power["model"]))
    times = [s.time for s in states]
    residuals = []
    for n in range(len(states) - 1):
        interval = times[n + 1] - times[n]
        residuals.append((energies[n + 1] - energies[n]) / interval - 0.5 * (powers[n] + powers[n + 1]))
    dts = np.diff(times)
    return EnergyBudgetReport(
        times=[0.5 * (a + b) for a, b in zip(times[:-1], times[1:])],
        residuals=residuals,
        spatial_defect=defect,
        dt=float(np.max(dts)) if len(dts) else 0.0,
    )


@dataclass()
class EquivalenceReport:
    status_u: Status
    status_w: Status
    rho_error: float
    u_error: float
    times: List[float]

    @property
    def completed(self) -> bool:
        return self.status_u == Status.COMPLETED and self.status_w == Status.COMPLETED

    @property
    def status(self) -> Status:
        return self.status_u if self.status_u != Status.COMPLETED else self.status_w

    @property
    def discrepancy(self) -> float:
        return max(self.rho_error, self.u_error)

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "rho_error": self.rho_error,
            "u_error": self.u_error,
            "discrepancy": self.discrepancy,
        }


def equivalence_run(initial: State, params: QnsParams, config: IntegratorConfig) -> EquivalenceReport:
    """ Same data through the u-form and the w-form, compared in (rho, u) at every snapshot. """
    initial.expect(Form.U)
    if config.adaptive:
        logger.info("Equivalence runs use fixed steps so both formulations share snapshot times")
    fixed = config.replace(adaptive=False)
    run_u = integrate(initial, params, fixed.replace(system=APPROX_U))
    run_w = integrate(to_w(initial, params), params, fixed.replace(system=APPROX_W))
    if not (run_u.completed and run_w.completed):
        logger.warning(f"Equivalence run aborted: u-form {run_u.status.value}, w-form {run_w.status.value}")
        return EquivalenceReport(run_u.status, run_w.status, math.inf, math.inf, [])

    rho_error, u_error = 0.0, 0.0
    for state_u, state_w in zip(run_u.snapshots, run_w.u_snapshots()):
        grid = state_u.grid
        rho_error = max(rho_error, lp_norm(ScalarField(grid, state_u.rho.values - state_w.rho.values), 2))
        speed = np.sqrt(np.sum((state_u.vel.values - state_w.vel.values) ** 2, axis=0))
        u_error = max(u_error, lp_norm(ScalarField(grid, speed), 2))
    logger.info(f"Equivalence discrepancy: rho {rho_error:.3e}, u {u_error:.3e}")
    return EquivalenceReport(run_u.status, run_w.status, rho_error, u_error, run_u.times)


def fit_order(dts: Sequence[float], errors: Sequence[float]) -> float:
    """ Least-squares slope of log(error) against log(dt). """
    if len(dts) != len(errors) or len(dts) < 2:
        raise InvalidArgument("Order fit needs at least two (dt, error) pairs")
    slope, _ = np.polyfit(np.log(np.asarray(dts, dtype=float)), np.log(np.abs(np.asarray(errors, dtype=float))), 1)
    return float(slope)


@dataclass()
class BoundsReport:
    mv_initial: float
    mv_max: float
    bd_initial: float
    bd_max: float
    rho_min: float
    rho_max: float
    growth_limit: float

    @property
    def mv_bounded(self) -> bool:
        return self.mv_max <= self.growth_limit * self.mv_initial + 1e-12

    @property
    def bd_bounded(self) -> bool:
        return self.bd_max <= self.growth_limit * self.bd_initial + 1e-12

    @property
    def band_positive(self) -> bool:
        return self.rho_min > 0 and math.isfinite(self.rho_max)

    @property
    def passed(self) -> bool:
        return self.mv_bounded and self.bd_bounded and self.band_positive

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data.update(
            passed=self.passed,
            mv_bounded=self.mv_bounded,
            bd_bounded=self.bd_bounded,
            band_positive=self.band_positive,
            note="empirical growth check over the run horizon, not a proof of the a-priori bound",
        )
        return data


def monitor_bounds(trajectory: Trajectory, growth_limit: float = 10.0) -> BoundsReport:
    records = trajectory.records
    low, high = trajectory.rho_band
    return BoundsReport(
        mv_initial=records[0].mv,
        mv_max=max(r.mv for r in records),
        bd_initial=records[0].bd_entropy,
        bd_max=max(r.bd_entropy for r in records),
        rho_min=low,
        rho_max=high,
        growth_limit=growth_limit,
    )


def write_monitor_csv(path: Union[str, Path], records: Sequence[MonitorRecord]):
    with atomic_write(str(path), overwrite=True, newline="") as f:
        writer = csv.writer(f)
        writer.writerow(MonitorRecord.columns())
        for record in records:
            writer.writerow([repr(float(x)) for x in record.as_row()])


def read_monitor_csv(path: Union[str, Path]) -> List[MonitorRecord]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Monitor file {path} does not exist")
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    missing = set(MonitorRecord.columns()) - set(rows[0] if rows else {})
    if missing:
        raise ConfigError(f"Monitor file {path} lacks columns {sorted(missing)}")
    return [MonitorRecord.from_row(row) for row in rows]


def format_records(records: Sequence[MonitorRecord], columns: Sequence[str]) -> str:
    """ sup / inf / time integral per column as a markdown-ready PrettyTable. """
    times = [r.time for r in records]
    pretty_table = PrettyTable(field_names=["Column", "sup", "inf", "∫ dt"])
    pretty_table.border = False
    all_columns = MonitorRecord.columns()
    rows = np.array([r.as_row() for r in records])
    for name in columns:
        values = rows[:, all_columns.index(name)]
        time_integral = trapezoid(values, times)
        pretty_table.add_row([name, f"{np.max(values):.6g}", f"{np.min(values):.6g}", f"{time_integral:.6g}"])
    return f"```md\n{pretty_table}```"
