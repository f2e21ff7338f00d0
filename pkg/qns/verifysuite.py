"""
Batch verification: identity, inequality and dynamics suites over seeded field ensembles.

Every instance is a pure function of (check, grid, seed), so instances fan out over a thread pool and are
merged back in (check, seed, grid) order; reports are identical for identical configs.
"""
import asyncio
import dataclasses
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import arrow
import numpy as np
from atomicwrites import atomic_write
from loguru import logger

# http://zetcode.com/python/prettytable/
from prettytable import PrettyTable  # pip install PTable

from qns.errors import ConfigError, QnsError
from qns.fieldkit import Grid, ScalarField, VectorField, random_smooth_positive, random_smooth_vector
from qns.functionals import (
    DEFAULT_ABS_TOL,
    DEFAULT_REL_TOL,
    IDENTITY_TOL,
    FunctionalReport,
    check_bd_momentum_identity,
    check_div_vs_D,
    check_flux_identity,
    check_grad6,
    check_grad_sqrtrho_u,
    check_jungel,
)
from qns.initdata import mollify, raw_to_state, scenario
from qns.qnsops import QnsParams, State, bohm_values, to_u, to_w
from qns.systems import APPROX_U, TARGET, TestFunction, weak_residual
from qns.timeloop import (
    IntegratorConfig,
    Status,
    energy_budget,
    equivalence_run,
    fit_order,
    integrate,
    monitor_bounds,
)

SUITES = ("identity", "inequality", "dynamics")
IDENTITY_CHECKS = (
    "bohm_forms",
    "flux_identity_r0",
    "flux_identity_r2",
    "grad_sqrtrho_u",
    "bd_momentum_identity",
    "transform_roundtrip",
)
INEQUALITY_CHECKS = ("jungel_quarter", "jungel_half", "grad6", "div_vs_D")
DYNAMICS_CHECKS = (
    "steady_state",
    "mass_balance",
    "equivalence",
    "energy_budget",
    "weak_residual",
    "mollified_vacuum",
    "monitor_bounds",
)
CHECKS = {"identity": IDENTITY_CHECKS, "inequality": INEQUALITY_CHECKS, "dynamics": DYNAMICS_CHECKS}

CANARY_CHECK = "bohm_forms"
CANARY_PERTURBATION = 1e-3
STEADY_TOL = 1e-10


@dataclass(frozen=True)
class DynamicsSettings:
    """ Short runs behind the dynamics suite; defaults are the acceptance configurations. """

    n: int = 128
    nu: float = 1.0
    kappa: float = 1 / 11
    eps: float = 1e-3
    t_end: float = 0.1
    dt_levels: Tuple[float, ...] = (4e-4, 2e-4, 1e-4)
    equivalence_tol: float = 1e-5
    min_mass_order: float = 1.8
    order_slack: float = 0.3
    mollifier_eps: float = 1e-2
    bounds_t_end: float = 1.0
    growth_limit: float = 10.0


@dataclass(frozen=True)
class SuiteConfig:
    suites: Tuple[str, ...] = SUITES
    seeds: Tuple[int, ...] = tuple(range(100))
    grids: Tuple[Tuple[int, int], ...] = ((1, 128), (2, 64), (3, 32))
    modes: int = 2
    floor: float = 1.0
    amplitude: float = 0.25
    checks: Optional[Tuple[str, ...]] = None
    rel_tol: float = DEFAULT_REL_TOL
    abs_tol: float = DEFAULT_ABS_TOL
    identity_tol: float = IDENTITY_TOL
    inject_bug: bool = False
    workers: int = 4
    dynamics: DynamicsSettings = DynamicsSettings()

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("Suite config needs at least one seed")
        if not self.grids:
            raise ConfigError("Suite config needs at least one grid")
        unknown = set(self.suites) - set(SUITES)
        if unknown:
            raise ConfigError(f"Unknown suites {sorted(unknown)}, choose from {SUITES}")
        if self.checks is not None:
            if not self.checks:
                raise ConfigError("Check selection is empty")
            known = {c for suite in SUITES for c in CHECKS[suite]}
            unknown = set(self.checks) - known
            if unknown:
                raise ConfigError(f"Unknown checks {sorted(unknown)}")
        if not self.selected_checks():
            raise ConfigError("No check selected for the chosen suites")
        if self.workers < 1:
            raise ConfigError(f"workers must be positive, got {self.workers}")

    def selected(self, suite: str) -> Tuple[str, ...]:
        if suite not in self.suites:
            return ()
        if self.checks is None:
            return CHECKS[suite]
        return tuple(c for c in CHECKS[suite] if c in self.checks)

    def selected_checks(self) -> Tuple[str, ...]:
        return tuple(c for suite in SUITES for c in self.selected(suite))

    def grid_objects(self) -> List[Grid]:
        return [Grid.cube(dim, n) for dim, n in self.grids]

    @classmethod
    def from_dict(cls, data: dict) -> "SuiteConfig":
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)} | {"generator"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown suite config keys: {sorted(unknown)}")
        data.update(data.pop("generator", {}))
        try:
            if "dynamics" in data:
                dynamics = dict(data["dynamics"])
                if "dt_levels" in dynamics:
                    dynamics["dt_levels"] = tuple(dynamics["dt_levels"])
                data["dynamics"] = DynamicsSettings(**dynamics)
            for key in ("suites", "seeds", "checks"):
                if data.get(key) is not None:
                    data[key] = tuple(data[key])
            if "grids" in data:
                data["grids"] = tuple((int(g["dim"]), int(g["n"])) for g in data["grids"])
            return cls(**data)
        except (TypeError, KeyError, ValueError) as e:
            raise ConfigError(f"Invalid suite config: {e}") from e


@dataclass()
class CheckResult:
    check: str
    seed: int
    grid: Tuple[int, ...]
    passed: bool
    lhs: float
    rhs: Optional[float]
    margin: Optional[float]
    detail: Dict[str, float] = field(default_factory=dict)

    @property
    def sort_key(self):
        return self.check, self.seed, len(self.grid), self.grid

    @classmethod
    def from_report(cls, report: FunctionalReport, seed: int, grid: Grid) -> "CheckResult":
        return cls(report.name, seed, grid.n, report.passed, report.lhs, report.rhs, report.margin, report.detail)

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["grid"] = list(self.grid)
        return data


@dataclass()
class CheckSummary:
    check: str
    count: int
    failures: int
    worst_margin: Optional[float]
    worst_seed: Optional[int]
    worst_grid: Optional[Tuple[int, ...]]


@dataclass()
class SuiteReport:
    suite: str
    results: List[CheckResult] = field(default_factory=list)
    canary: Optional[CheckResult] = None

    @property
    def failures(self) -> List[CheckResult]:
        return [r for r in self.results if not r.passed]

    @property
    def canary_tripped(self) -> bool:
        return self.canary is None or not self.canary.passed

    @property
    def passed(self) -> bool:
        return not self.failures and self.canary_tripped

    def summaries(self) -> List[CheckSummary]:
        summaries = []
        for check in dict.fromkeys(r.check for r in self.results):
            results = [r for r in self.results if r.check == check]
            with_margin = [r for r in results if r.margin is not None]
            worst = min(with_margin, key=lambda r: r.margin) if with_margin else None
            summaries.append(
                CheckSummary(
                    check=check,
                    count=len(results),
                    failures=sum(not r.passed for r in results),
                    worst_margin=None if worst is None else worst.margin,
                    worst_seed=None if worst is None else worst.seed,
                    worst_grid=None if worst is None else worst.grid,
                )
            )
        return summaries

    def to_dict(self) -> dict:
        return {
            "suite": self.suite,
            "passed": self.passed,
            "failures": len(self.failures),
            "checks": [dataclasses.asdict(s) for s in self.summaries()],
            "canary": None if self.canary is None else self.canary.to_dict(),
            "failed": [r.to_dict() for r in self.failures],
        }

    def format_table(self) -> str:
        pretty_table = PrettyTable(field_names=["Check", "Count", "Failures", "Worst margin", "Worst seed"])
        pretty_table.border = False
        for s in self.summaries():
            margin = "-" if s.worst_margin is None else f"{s.worst_margin:.3e}"
            seed = "-" if s.worst_seed is None else s.worst_seed
            pretty_table.add_row([s.check, s.count, s.failures, margin, seed])
        return f"```md\n{pretty_table}```"


def _ensemble_rho(grid: Grid, seed: int, config: SuiteConfig) -> ScalarField:
    return random_smooth_positive(grid, seed, config.modes, config.floor, config.amplitude)


def _ensemble_u(grid: Grid, seed: int, config: SuiteConfig) -> VectorField:
    return random_smooth_vector(grid, seed + 1_000_003, config.modes, config.amplitude)


def _relative_l2(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.sqrt(np.mean(a ** 2))), float(np.sqrt(np.mean(b ** 2))), DEFAULT_ABS_TOL)
    return float(np.sqrt(np.mean((a - b) ** 2))) / scale


def bohm_forms_report(rho: ScalarField, tolerance: float, perturb: bool = False) -> FunctionalReport:
    """ Largest pairwise relative L2 distance between the three Bohm force forms. """
    d = rho.grid.spectral
    forms = {tag: bohm_values(rho.values, tag, d) for tag in "ABC"}
    if perturb:
        forms["C"] = forms["C"] + CANARY_PERTURBATION * d.gradient(rho.values)
    distances = {
        f"{a}{b}": _relative_l2(forms[a], forms[b]) for a, b in (("A", "B"), ("A", "C"), ("B", "C"))
    }
    worst = max(distances.values())
    return FunctionalReport("bohm_forms", worst, tolerance, rel_tol=0.0, abs_tol=0.0, detail=distances)


def _transform_roundtrip(rho: ScalarField, u: VectorField, tolerance: float) -> FunctionalReport:
    params = QnsParams(nu=1.0, kappa=1 / 11)
    state = State(rho, u)
    back = to_u(to_w(state, params), params)
    difference = float(np.max(np.abs(back.vel.values - u.values)))
    return FunctionalReport("transform_roundtrip", difference, tolerance, rel_tol=0.0, abs_tol=0.0)


def identity_instance(check: str, grid: Grid, seed: int, config: SuiteConfig) -> CheckResult:
    rho = _ensemble_rho(grid, seed, config)
    tol = config.identity_tol
    if check == "bohm_forms":
        report = bohm_forms_report(rho, tol, perturb=config.inject_bug)
    elif check == "flux_identity_r0":
        report = check_flux_identity(rho.like(np.sqrt(rho.values)), 0, tolerance=tol)
    elif check == "flux_identity_r2":
        report = check_flux_identity(rho.like(np.sqrt(rho.values)), 2, tolerance=tol)
    elif check == "grad_sqrtrho_u":
        report = check_grad_sqrtrho_u(rho, _ensemble_u(grid, seed, config), tolerance=tol)
    elif check == "bd_momentum_identity":
        report = check_bd_momentum_identity(rho, _ensemble_u(grid, seed, config), tolerance=tol)
    elif check == "transform_roundtrip":
        report = _transform_roundtrip(rho, _ensemble_u(grid, seed, config), 1e-12)
    else:
        raise ConfigError(f"Unknown identity check {check!r}")
    return CheckResult.from_report(report, seed, grid)


def inequality_instance(check: str, grid: Grid, seed: int, config: SuiteConfig) -> CheckResult:
    rho = _ensemble_rho(grid, seed, config)
    if check in ("jungel_quarter", "jungel_half"):
        quarter, half = check_jungel(rho)
        report = quarter if check == "jungel_quarter" else half
    elif check == "grad6":
        report = check_grad6(rho.like(np.sqrt(rho.values)))
    elif check == "div_vs_D":
        report = check_div_vs_D(rho, _ensemble_u(grid, seed, config))
    else:
        raise ConfigError(f"Unknown inequality check {check!r}")
    report.rel_tol, report.abs_tol = config.rel_tol, config.abs_tol
    return CheckResult.from_report(report, seed, grid)


def canary_instance(grid: Grid, seed: int, config: SuiteConfig) -> CheckResult:
    """ The Bohm form check on a deliberately perturbed form C; it must fail. """
    report = bohm_forms_report(_ensemble_rho(grid, seed, config), config.identity_tol, perturb=True)
    report.name = "canary_bohm_forms"
    return CheckResult.from_report(report, seed, grid)


def _fixed(settings: DynamicsSettings, dt: float, system: str, t_end: Optional[float] = None) -> IntegratorConfig:
    return IntegratorConfig(
        dt_init=dt,
        dt_min=min(dt, 1e-10),
        dt_max=max(dt, 1e-2),
        t_end=settings.t_end if t_end is None else t_end,
        adaptive=False,
        system=system,
    )


def _params(settings: DynamicsSettings, **changes) -> QnsParams:
    return QnsParams(nu=settings.nu, kappa=settings.kappa, eps=settings.eps).replace(**changes)


def _result(check: str, grid: Grid, passed: bool, lhs: float, rhs: Optional[float], **detail) -> CheckResult:
    margin = None if rhs is None else rhs - lhs
    return CheckResult(check, 0, grid.n, bool(passed), float(lhs), rhs, margin, detail)


def _steady_state(settings: DynamicsSettings) -> CheckResult:
    grid = Grid.cube(1, settings.n)
    params = _params(settings, eps=0.0)
    state = raw_to_state(scenario("uniform-rest", grid))
    dt = settings.dt_levels[0]
    run = integrate(state, params, _fixed(settings, dt, APPROX_U, t_end=10 * dt))
    drift = max(
        float(np.max(np.abs(run.final.rho.values - 1.0))),
        float(np.max(np.abs(run.final.vel.values))),
    )
    budget = energy_budget(run, params).max_residual
    weak = weak_residual(run.snapshots, TestFunction((1,)), params)
    worst = max(drift, abs(budget), weak)
    return _result("steady_state", grid, run.completed and worst < STEADY_TOL, worst, STEADY_TOL,
                   drift=drift, energy_budget=budget, weak_residual=weak)


def _mass_balance(settings: DynamicsSettings) -> CheckResult:
    grid = Grid.cube(1, settings.n)
    params = _params(settings)
    state = raw_to_state(scenario("acoustic-1d", grid))
    residuals = []
    for dt in settings.dt_levels:
        run = integrate(state, params, _fixed(settings, dt, APPROX_U))
        if not run.completed:
            return _result("mass_balance", grid, False, math.inf, settings.min_mass_order, status=run.status.value)
        residuals.append(max(r.mass_balance_residual for r in run.records))
    if max(residuals) < STEADY_TOL * 1e-3:
        return _result("mass_balance", grid, True, max(residuals), None, order=math.nan)
    order = fit_order(settings.dt_levels, residuals)
    return _result(
        "mass_balance", grid, order >= settings.min_mass_order, settings.min_mass_order, order,
        order=order, finest=residuals[-1],
    )


def _equivalence(settings: DynamicsSettings) -> CheckResult:
    grid = Grid.cube(1, settings.n)
    params = _params(settings)
    state = raw_to_state(scenario("acoustic-1d", grid))
    errors = []
    for dt in settings.dt_levels:
        report = equivalence_run(state, params, _fixed(settings, dt, APPROX_U))
        if not report.completed:
            return _result("equivalence", grid, False, math.inf, settings.equivalence_tol, status=report.status.value)
        errors.append(report.discrepancy)
    monotone = all(b < a for a, b in zip(errors[:-1], errors[1:]))
    finest = errors[-1]
    return _result(
        "equivalence", grid, monotone and finest < settings.equivalence_tol, finest, settings.equivalence_tol,
        monotone=float(monotone), coarsest=errors[0],
    )


def _energy_budget(settings: DynamicsSettings) -> CheckResult:
    grid = Grid.cube(1, settings.n)
    params = _params(settings)
    state = raw_to_state(scenario("moving-1d", grid))
    residuals, defect = [], 0.0
    for dt in settings.dt_levels:
        run = integrate(state, params, _fixed(settings, dt, APPROX_U))
        if not run.completed:
            return _result("energy_budget", grid, False, math.inf, 2.0, status=run.status.value)
        report = energy_budget(run, params)
        residuals.append(report.max_residual)
        defect = max(defect, report.spatial_defect)
    order = fit_order(settings.dt_levels, residuals)
    passed = abs(order - 2.0) <= settings.order_slack
    return _result("energy_budget", grid, passed, abs(order - 2.0), settings.order_slack,
                   order=order, finest=residuals[-1], spatial_defect=defect)


def _weak_residual(settings: DynamicsSettings) -> CheckResult:
    grid = Grid.cube(1, settings.n)
    params = _params(settings, eps=0.0)
    state = raw_to_state(scenario("moving-1d", grid))
    test_function = TestFunction((1,), horizon=settings.t_end)
    residuals = []
    for dt in settings.dt_levels:
        run = integrate(state, params, _fixed(settings, dt, TARGET))
        if not run.completed:
            return _result("weak_residual", grid, False, math.inf, None, status=run.status.value)
        residuals.append(weak_residual(run.snapshots, test_function, params))
    decreasing = all(b < a for a, b in zip(residuals[:-1], residuals[1:])) or max(residuals) < STEADY_TOL
    return _result("weak_residual", grid, decreasing, residuals[-1], residuals[0], coarsest=residuals[0])


def _mollified_vacuum(settings: DynamicsSettings) -> CheckResult:
    grid = Grid.cube(1, settings.n)
    params = _params(settings, eps=settings.mollifier_eps)
    state = mollify(scenario("vacuum-bump-1d", grid), settings.mollifier_eps, params)
    config = IntegratorConfig(t_end=settings.t_end, dt_init=1e-4, dt_max=1e-3, system=APPROX_U)
    run = integrate(state, params, config)
    low, high = run.rho_band
    passed = run.status == Status.COMPLETED and low > config.positivity_floor
    return _result("mollified_vacuum", grid, passed, config.positivity_floor, low, rho_min=low, rho_max=high)


def _monitor_bounds(settings: DynamicsSettings) -> CheckResult:
    grid = Grid.cube(1, settings.n)
    params = _params(settings)
    state = raw_to_state(scenario("moving-1d", grid))
    config = IntegratorConfig(t_end=settings.bounds_t_end, dt_init=1e-4, dt_max=1e-2, system=APPROX_U)
    run = integrate(state, params, config)
    if not run.completed:
        return _result("monitor_bounds", grid, False, math.inf, settings.growth_limit, status=run.status.value)
    bounds = monitor_bounds(run, settings.growth_limit)
    growth = max(bounds.mv_max / bounds.mv_initial, bounds.bd_max / bounds.bd_initial)
    return _result(
        "monitor_bounds", grid, bounds.passed, growth, settings.growth_limit,
        rho_min=bounds.rho_min, rho_max=bounds.rho_max, mv_max=bounds.mv_max, bd_max=bounds.bd_max,
    )


DYNAMICS: Dict[str, Callable[[DynamicsSettings], CheckResult]] = {
    "steady_state": _steady_state,
    "mass_balance": _mass_balance,
    "equivalence": _equivalence,
    "energy_budget": _energy_budget,
    "weak_residual": _weak_residual,
    "mollified_vacuum": _mollified_vacuum,
    "monitor_bounds": _monitor_bounds,
}


def dynamics_instance(check: str, settings: DynamicsSettings) -> CheckResult:
    try:
        return DYNAMICS[check](settings)
    except QnsError as e:
        logger.warning(f"Dynamics check {check} raised {e!r}")
        return CheckResult(check, 0, (settings.n,), False, math.inf, None, None, {"error": str(e)})


async def _fan_out(jobs: Sequence[Callable[[], CheckResult]], workers: int) -> List[CheckResult]:
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = await asyncio.gather(*[loop.run_in_executor(pool, job) for job in jobs])
    return sorted(results, key=lambda r: r.sort_key)


def _log_report(report: SuiteReport, started: arrow.Arrow):
    for s in report.summaries():
        logger.info(f"{report.suite}/{s.check}: {s.count - s.failures}/{s.count} passed, worst margin {s.worst_margin}")
    for r in report.failures:
        logger.warning(f"{report.suite}/{r.check} failed for seed {r.seed} on grid {r.grid}: lhs={r.lhs!r} rhs={r.rhs!r}")
    if report.canary is not None and not report.canary_tripped:
        logger.warning(f"Canary {report.canary.check} passed; the {report.suite} suite cannot detect errors")
    logger.info(f"{report.suite} suite {'passed' if report.passed else 'FAILED'}, started {started.humanize()}")


def _ensemble_jobs(checks, config: SuiteConfig, instance) -> List[Callable[[], CheckResult]]:
    return [
        (lambda c=check, g=grid, s=seed: instance(c, g, s, config))
        for check in checks
        for grid in config.grid_objects()
        for seed in config.seeds
    ]


async def run_identity_suite(config: SuiteConfig) -> SuiteReport:
    started = arrow.utcnow()
    checks = config.selected("identity")
    results = await _fan_out(_ensemble_jobs(checks, config, identity_instance), config.workers)
    report = SuiteReport("identity", results)
    if CANARY_CHECK in checks:
        report.canary = canary_instance(config.grid_objects()[0], config.seeds[0], config)
    _log_report(report, started)
    return report


async def run_inequality_suite(config: SuiteConfig) -> SuiteReport:
    started = arrow.utcnow()
    checks = config.selected("inequality")
    results = await _fan_out(_ensemble_jobs(checks, config, inequality_instance), config.workers)
    report = SuiteReport("inequality", results)
    _log_report(report, started)
    return report


async def run_dynamics_suite(config: SuiteConfig) -> SuiteReport:
    started = arrow.utcnow()
    jobs = [(lambda c=check: dynamics_instance(c, config.dynamics)) for check in config.selected("dynamics")]
    report = SuiteReport("dynamics", await _fan_out(jobs, config.workers))
    _log_report(report, started)
    return report


RUNNERS = {
    "identity": run_identity_suite,
    "inequality": run_inequality_suite,
    "dynamics": run_dynamics_suite,
}


async def run_suites(config: SuiteConfig) -> List[SuiteReport]:
    reports = []
    for suite in SUITES:
        if config.selected(suite):
            reports.append(await RUNNERS[suite](config))
    return reports


def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    raise TypeError(f"Not JSON serializable: {value!r}")


def write_suite_report(path: Union[str, Path], reports: Sequence[SuiteReport]):
    data = {
        "passed": all(r.passed for r in reports),
        "suites": [r.to_dict() for r in reports],
    }
    with atomic_write(str(path), overwrite=True) as f:
        json.dump(data, f, indent=2, default=_json_default)


def write_results_jsonl(path: Union[str, Path], reports: Sequence[SuiteReport]):
    with atomic_write(str(path), overwrite=True) as f:
        for report in reports:
            for result in report.results:
                f.write(json.dumps(dict(suite=report.suite, **result.to_dict()), default=_json_default) + "\n")
