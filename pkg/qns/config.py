"""
Run, sweep and suite configuration files (JSON).

Only the output directory may come from the environment (QNS_OUT_DIR); a command line --out beats it.
"""
import itertools
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Union

from loguru import logger

from qns.errors import ConfigError, InvalidArgument
from qns.fieldkit import Grid
from qns.initdata import RawData, get_scenario, load_raw, mollify, raw_to_state
from qns.qnsops import MODES, Form, QnsParams, State, to_w
from qns.systems import SYSTEMS, get_system
from qns.timeloop import IntegratorConfig
from qns.verifysuite import SuiteConfig

OUT_DIR_ENV = "QNS_OUT_DIR"
DEFAULT_OUT_DIR = "qns_out"
SWEEP_AXES = ("kappa", "r0", "r1", "eps")
RUN_KEYS = {
    "scenario",
    "snapshot",
    "grid",
    "params",
    "integrator",
    "system",
    "mollify_eps",
    "output_dir",
    "mode",
    "sweep",
}


def read_json(path: Union[str, Path]) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file {path} does not exist")
    try:
        with open(path) as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Config file {path} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"Config file {path} must hold a JSON object")
    return data


def resolve_output_dir(configured: Optional[str], override: Optional[str] = None) -> Path:
    if override:
        return Path(override)
    if os.environ.get(OUT_DIR_ENV):
        return Path(os.environ[OUT_DIR_ENV])
    return Path(configured or DEFAULT_OUT_DIR)


@dataclass()
class RunConfig:
    params: QnsParams
    integrator: IntegratorConfig
    output_dir: Path
    scenario: Optional[str] = None
    snapshot: Optional[Path] = None
    grid: Optional[Grid] = None
    mollify_eps: Optional[float] = None
    mode: str = "desk"
    sweep: Dict[str, List[float]] = field(default_factory=dict)

    def raw_data(self) -> RawData:
        if self.snapshot is not None:
            return load_raw(self.snapshot)
        return get_scenario(self.scenario).generate(self.grid or get_scenario(self.scenario).recommended_grid())

    def initial_state(self, params: Optional[QnsParams] = None) -> State:
        """ Scenario or snapshot data, mollified when asked to or when it touches vacuum. """
        params = self.params if params is None else params
        raw = self.raw_data()
        eps = self.mollify_eps
        if eps is None and raw.vacuum_nodes:
            eps = params.eps
            if not eps > 0:
                raise ConfigError(f"Initial data has {raw.vacuum_nodes} vacuum node(s); set mollify_eps or eps > 0")
            logger.info(f"Initial data touches vacuum, mollifying with eps={eps}")
        state = mollify(raw, eps, params) if eps is not None else raw_to_state(raw)
        if get_system(self.integrator.system).form == Form.W:
            state = to_w(state, params)
        return state

    def sweep_points(self) -> List[Dict[str, float]]:
        axes = [axis for axis in SWEEP_AXES if axis in self.sweep]
        if not axes:
            return [{}]
        return [dict(zip(axes, values)) for values in itertools.product(*[self.sweep[a] for a in axes])]


def _grid(block: Optional[dict]) -> Optional[Grid]:
    if block is None:
        return None
    try:
        if "length" in block:
            return Grid.cube(int(block["dim"]), int(block["n"]), float(block["length"]))
        return Grid.cube(int(block["dim"]), int(block["n"]))
    except (KeyError, TypeError, InvalidArgument) as e:
        raise ConfigError(f"Invalid grid block {block}: {e}") from e


def parse_run_config(
    data: dict, base: Path = Path("."), mode: Optional[str] = None, out: Optional[str] = None
) -> RunConfig:
    unknown = set(data) - RUN_KEYS
    if unknown:
        raise ConfigError(f"Unknown run config keys: {sorted(unknown)}")
    if ("scenario" in data) == ("snapshot" in data):
        raise ConfigError("Run config needs exactly one of 'scenario' or 'snapshot'")
    mode = mode or data.get("mode", "desk")
    if mode not in MODES:
        raise ConfigError(f"Unknown mode {mode!r}, choose one of {MODES}")
    system = data.get("system", "approx-u")
    if system not in SYSTEMS:
        raise ConfigError(f"Unknown system {system!r}, choose one of {sorted(SYSTEMS)}")

    try:
        params = QnsParams.from_dict(data.get("params", {}))
        if mode == "paper":
            params = params.in_mode("paper")
        integrator = IntegratorConfig.from_dict({**data.get("integrator", {}), "system": system})
    except InvalidArgument as e:
        raise ConfigError(str(e)) from e

    scenario_name = data.get("scenario")
    if scenario_name is not None:
        get_scenario(scenario_name)
    snapshot = None
    if "snapshot" in data:
        snapshot = Path(data["snapshot"])
        if not snapshot.is_absolute():
            snapshot = base / snapshot
        if not snapshot.is_file():
            raise ConfigError(f"Snapshot file {snapshot} does not exist")

    sweep = data.get("sweep", {})
    unknown_axes = set(sweep) - set(SWEEP_AXES)
    if unknown_axes:
        raise ConfigError(f"Unknown sweep axes {sorted(unknown_axes)}, choose from {SWEEP_AXES}")
    if any(not isinstance(values, list) or not values for values in sweep.values()):
        raise ConfigError("Every sweep axis needs a nonempty list of values")

    return RunConfig(
        params=params,
        integrator=integrator,
        output_dir=resolve_output_dir(data.get("output_dir"), out),
        scenario=scenario_name,
        snapshot=snapshot,
        grid=_grid(data.get("grid")),
        mollify_eps=data.get("mollify_eps"),
        mode=mode,
        sweep={k: [float(x) for x in v] for k, v in sweep.items()},
    )


def load_run_config(path: Union[str, Path], mode: Optional[str] = None, out: Optional[str] = None) -> RunConfig:
    path = Path(path)
    return parse_run_config(read_json(path), path.parent, mode, out)


def load_suite_config(path: Optional[Union[str, Path]], workers: Optional[int] = None) -> SuiteConfig:
    data = {} if path is None else read_json(path)
    data.pop("output_dir", None)
    if workers is not None:
        data["workers"] = workers
    return SuiteConfig.from_dict(data)


def suite_output_dir(path: Optional[Union[str, Path]], out: Optional[str] = None) -> Path:
    configured = None if path is None else read_json(path).get("output_dir")
    return resolve_output_dir(configured, out)
