"""
Initial data: raw (possibly vacuum) data, the scenario library, the mollifier to strictly positive smooth
data and the initial-norm report.
"""
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, Optional, Union

import numpy as np
from loguru import logger

# http://zetcode.com/python/prettytable/
from prettytable import PrettyTable  # pip install PTable

from qns.errors import ConfigError, GridError, InvalidArgument
from qns.fieldkit import Grid, ScalarField, VectorField, filter_values, integral, low_pass, lp_norm
from qns.qnsops import Form, QnsParams, State, count_nonpositive
from qns.snapshot import read_snapshot


@dataclass()
class RawData:
    """ rho0 >= 0 with momentum m0 vanishing on the vacuum set {rho0 = 0}. """

    rho0: ScalarField
    m0: VectorField

    def __post_init__(self):
        if self.rho0.grid != self.m0.grid:
            raise GridError("Raw density and momentum live on different grids")
        rho = self.rho0.values
        if not np.all(np.isfinite(rho)) or np.any(rho < 0):
            raise InvalidArgument(f"Raw density must be finite and nonnegative, min {float(np.min(rho))!r}")
        vacuum = rho == 0
        if np.any(self.m0.values[:, vacuum] != 0):
            raise InvalidArgument("Raw momentum must vanish on the vacuum set of the density")

    @property
    def grid(self) -> Grid:
        return self.rho0.grid

    @property
    def vacuum_nodes(self) -> int:
        return int(np.count_nonzero(self.rho0.values == 0))

    @classmethod
    def from_velocity(cls, rho0: ScalarField, u0: VectorField) -> "RawData":
        return cls(rho0, VectorField(rho0.grid, rho0.values * u0.values))


Generator = Callable[[Grid], RawData]


@dataclass(frozen=True)
class Scenario:
    name: str
    generate: Generator
    dim: int
    n: int
    description: str
    params: Dict[str, float] = field(default_factory=dict)
    needs_mollifier: bool = False

    def recommended_grid(self) -> Grid:
        return Grid.cube(self.dim, self.n)


def _require_dim(grid: Grid, dim: int, name: str):
    if grid.dim != dim:
        raise GridError(f"Scenario {name!r} is defined on {dim}D grids, got {grid.dim}D")


def _x(grid: Grid) -> np.ndarray:
    return grid.coordinates[0]


def _uniform_rest(grid: Grid) -> RawData:
    return RawData(ScalarField(grid, np.ones(grid.shape)), VectorField.zeros(grid))


def _acoustic_1d(grid: Grid) -> RawData:
    _require_dim(grid, 1, "acoustic-1d")
    return RawData(ScalarField(grid, 1 + 0.1 * np.sin(_x(grid))), VectorField.zeros(grid))


def _vacuum_bump_1d(grid: Grid) -> RawData:
    _require_dim(grid, 1, "vacuum-bump-1d")
    # sin^4 times the window exp(1 - 1/sin) on (0, pi), exact zeros on [pi, 2 pi)
    s = np.sin(_x(grid))
    inside = s > 0
    rho = np.zeros(grid.shape)
    rho[inside] = s[inside] ** 4 * np.exp(1.0 - 1.0 / s[inside])
    return RawData(ScalarField(grid, rho), VectorField.zeros(grid))


def _moving_1d(grid: Grid) -> RawData:
    _require_dim(grid, 1, "moving-1d")
    x = _x(grid)
    rho = ScalarField(grid, 1 + 0.3 * np.sin(x))
    return RawData.from_velocity(rho, VectorField(grid, (0.5 * np.cos(x))[np.newaxis]))


def _shear_2d(grid: Grid) -> RawData:
    _require_dim(grid, 2, "shear-2d")
    x, y = grid.coordinates
    rho = ScalarField(grid, 1 + 0.2 * np.cos(x) * np.cos(y))
    u = VectorField(grid, np.stack([0.5 * np.sin(y), 0.1 * np.sin(x)]))
    return RawData.from_velocity(rho, u)


SCENARIOS: Dict[str, Scenario] = {
    s.name: s
    for s in (
        Scenario("uniform-rest", _uniform_rest, 1, 64, "rho0 = 1, u0 = 0"),
        Scenario("acoustic-1d", _acoustic_1d, 1, 128, "rho0 = 1 + 0.1 sin x, u0 = 0", {"nu": 1.0}),
        Scenario(
            "vacuum-bump-1d",
            _vacuum_bump_1d,
            1,
            128,
            "rho0 = max(0, sin x)^4 exp(1 - 1/sin x) on (0, pi), m0 = 0",
            {"nu": 1.0, "eps": 1e-2},
            needs_mollifier=True,
        ),
        Scenario("moving-1d", _moving_1d, 1, 128, "rho0 = 1 + 0.3 sin x, u0 = 0.5 cos x", {"nu": 1.0}),
        Scenario(
            "shear-2d", _shear_2d, 2, 64, "rho0 = 1 + 0.2 cos x cos y, u0 = (0.5 sin y, 0.1 sin x)", {"nu": 1.0}
        ),
    )
}


def get_scenario(name: str) -> Scenario:
    if name not in SCENARIOS:
        raise ConfigError(f"Unknown scenario {name!r}, choose one of {sorted(SCENARIOS)}")
    return SCENARIOS[name]


def scenario(name: str, grid: Optional[Grid] = None) -> RawData:
    chosen = get_scenario(name)
    return chosen.generate(chosen.recommended_grid() if grid is None else grid)


def mollifier_cutoff(grid: Grid, eps: float, sigma0: float) -> int:
    """ ceil(eps^-sigma0), capped at the 2/3 dealias limit of the grid. """
    cap = min(grid.n) // 3
    exponent = -sigma0 * math.log(eps)
    if exponent > math.log(cap):
        return cap
    return min(cap, int(math.ceil(math.exp(exponent))))


def mollifier_floor(eps: float, sigma0: float) -> float:
    """ Density value produced by the floor on vacuum: eps^(4 sigma0). """
    return float(np.exp(4 * sigma0 * np.log(eps)))


def mollify(raw: RawData, eps: float, params: QnsParams) -> State:
    """
    Smooth, floor and pair the raw data:
        rho~  = max(low-pass(rho0), 0)
        rho_e = (rho~^6 + eps^(24 sigma0))^(1/6)
        m~    = low-pass(rho0^-1/2 m0), zero on vacuum
        u_e   = rho_e^-1/2 m~
    """
    if not eps > 0:
        raise InvalidArgument(f"Mollifier needs eps > 0, got {eps}")
    grid = raw.grid
    sigma0 = params.sigma0
    cutoff = mollifier_cutoff(grid, eps, sigma0)

    smooth = np.maximum(low_pass(raw.rho0, cutoff).values, 0.0)
    floor_sixth = np.exp(24 * sigma0 * np.log(eps))
    rho = (smooth ** 6 + floor_sixth) ** (1.0 / 6.0)

    rho0 = raw.rho0.values
    occupied = rho0 > 0
    weighted = np.zeros_like(raw.m0.values)
    weighted[:, occupied] = raw.m0.values[:, occupied] / np.sqrt(rho0[occupied])
    momentum = filter_values(weighted, grid, grid.cutoff_mask(cutoff))
    u = momentum / np.sqrt(rho)

    logger.debug(
        f"Mollified {raw.vacuum_nodes} vacuum node(s): eps={eps}, sigma0={sigma0}, cutoff={cutoff}, "
        f"floor={mollifier_floor(eps, sigma0)!r}"
    )
    return State(ScalarField(grid, rho), VectorField(grid, u), Form.U, 0.0)


def raw_to_state(raw: RawData) -> State:
    """ Strictly positive raw data taken as is: u0 = m0 / rho0. """
    count, lowest = count_nonpositive(raw.rho0.values)
    if count:
        raise InvalidArgument(f"Raw density vanishes at {count} node(s) (min {lowest!r}); mollify it first")
    u = raw.m0.values / raw.rho0.values
    return State(raw.rho0, VectorField(raw.grid, u), Form.U, 0.0)


def load_raw(path: Union[str, Path]) -> RawData:
    """ RawData from a snapshot holding "rho" and either "m" or "u". """
    snapshot = read_snapshot(path)
    if "rho" not in snapshot.fields:
        raise ConfigError(f"Snapshot {path} has no 'rho' field")
    grid = snapshot.grid
    rho = ScalarField(grid, snapshot.fields["rho"])
    try:
        if "m" in snapshot.fields:
            return RawData(rho, VectorField(grid, snapshot.fields["m"]))
        if "u" in snapshot.fields:
            return RawData.from_velocity(rho, VectorField(grid, snapshot.fields["u"]))
    except InvalidArgument as e:
        raise ConfigError(f"Snapshot {path} is not admissible raw data: {e}") from e
    return RawData(rho, VectorField.zeros(grid))


@dataclass()
class InitialReport:
    values: Dict[str, float]

    @property
    def finite(self) -> bool:
        return all(np.isfinite(v) for v in self.values.values())

    @property
    def nonfinite(self):
        return sorted(k for k, v in self.values.items() if not np.isfinite(v))

    def to_dict(self) -> dict:
        return {"finite": self.finite, "nonfinite": self.nonfinite, "values": dict(self.values)}

    def format_table(self) -> str:
        pretty_table = PrettyTable(field_names=["Norm", "Value"])
        pretty_table.border = False
        pretty_table.align = "l"
        for name, value in self.values.items():
            pretty_table.add_row([name, f"{value:.10g}"])
        return f"```md\n{pretty_table}```"


def validate_initial(
    state: State, params: QnsParams, damping_free: bool = False, eta: float = 0.1
) -> InitialReport:
    """ The norms that the a-priori estimates need bounded at t = 0. """
    state.expect(Form.U)
    grid = state.grid
    d = grid.spectral
    rho, u = state.rho.values, state.vel.values
    v = np.sqrt(rho)
    grad_v_sq = np.sum(d.gradient(v) ** 2, axis=0)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        values = {
            "r0_log_minus_rho_L1": params.r0 * integral(np.abs(np.minimum(np.log(rho), 0.0)), grid),
            "rho_L1": lp_norm(state.rho, 1),
            "rho_Lgamma": lp_norm(state.rho, params.gamma),
            "grad_sqrt_rho_L2": integral(grad_v_sq, grid) ** 0.5,
            "eps_grad_sqrt_rho_L4_4": params.eps * integral(grad_v_sq ** 2, grid),
            "eps_rho_negative_power_L1": params.eps * integral(rho ** (-params.p0), grid),
            "kinetic": integral(rho * np.sum(u ** 2, axis=0), grid),
        }
        if damping_free:
            if not eta > 0:
                raise InvalidArgument(f"eta must be positive, got {eta}")
            p = 2 + eta
            values[f"sqrt_rho_L{p:g}"] = integral(v ** p, grid) ** (1 / p)
            values[f"sqrt_rho_u_L{p:g}"] = integral(np.sqrt(np.sum((v * u) ** 2, axis=0)) ** p, grid) ** (1 / p)
    report = InitialReport(values)
    if not report.finite:
        logger.warning(f"Initial data has nonfinite norms: {report.nonfinite}")
    return report
