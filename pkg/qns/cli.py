"""
Command line: run, verify, sweep and report.

Exit codes: 0 success, 1 failed checks / runs or unexpected error, 2 configuration or admissibility error,
3 positivity failure.
"""
import argparse
import asyncio
import csv
import json
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import arrow
from atomicwrites import atomic_write
from loguru import logger

# http://zetcode.com/python/prettytable/
from prettytable import PrettyTable  # pip install PTable

from qns.config import SWEEP_AXES, load_run_config, load_suite_config, suite_output_dir
from qns.errors import AdmissibilityError, ConfigError, FormulationError, PositivityFailure, QnsError, VacuumError
from qns.functionals import MONITOR_COLUMNS, MonitorRecord
from qns.initdata import validate_initial
from qns.qnsops import Form, QnsParams, check_constraints, to_u
from qns.snapshot import Snapshot, write_snapshot
from qns.timeloop import (
    Status,
    Trajectory,
    format_records,
    integrate,
    monitor_bounds,
    read_monitor_csv,
    write_monitor_csv,
)
from qns.verifysuite import run_suites, write_results_jsonl, write_suite_report

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_POSITIVITY = 3

MONITOR_FILE = "monitor.csv"
SNAPSHOT_FILE = "final.snapshot"
SUMMARY_FILE = "summary.json"
REPORT_FILE = "report.md"
SUITE_REPORT_FILE = "suite_report.json"
SUITE_RESULTS_FILE = "suite_results.jsonl"
SWEEP_FILE = "sweep_summary.csv"
ERROR_LOG = "qns_error.log"

SWEEP_COLUMNS = ("energy", "bd_entropy", "mv", "rho_max", "mass", "mass_balance_residual")


def write_error(error: Exception, file_name: str = ERROR_LOG):
    """ Append a timestamped traceback of an unexpected error. """
    time_now_readable = arrow.now().format()
    trace = traceback.format_exc()
    with open(file_name, "a") as f:
        f.write("\n")
        f.write(time_now_readable)
        f.write("\n")
        f.write(str(error))
        f.write("\n")
        f.write(trace)
    logger.error(f"Unexpected error, traceback appended to {file_name}: {error!r}")


def write_json(path: Path, data: dict):
    with atomic_write(str(path), overwrite=True) as f:
        json.dump(data, f, indent=2, sort_keys=True)


def _final_snapshot(trajectory: Trajectory) -> Snapshot:
    state = trajectory.final
    fields = {"rho": state.rho.values}
    if state.form == Form.W:
        fields["w"] = state.vel.values
        state = to_u(state, trajectory.params)
    fields["u"] = state.vel.values
    return Snapshot(state.grid, state.time, state.form.value, fields)


def run_summary(trajectory: Trajectory, params: QnsParams, initial_report: dict) -> dict:
    summary = trajectory.summary()
    summary["params"] = params.to_dict()
    summary["integrator"] = trajectory.config.to_dict()
    summary["constraints"] = check_constraints(params.replace(strict_mode=False)).to_dict()
    summary["initial"] = initial_report
    summary["bounds"] = monitor_bounds(trajectory).to_dict()
    return summary


def _status_table(trajectory: Trajectory) -> str:
    record = trajectory.records[-1]
    pretty_table = PrettyTable(field_names=["Quantity", "Value"])
    pretty_table.border = False
    pretty_table.align = "l"
    pretty_table.add_row(["status", trajectory.status.value])
    pretty_table.add_row(["steps", trajectory.steps])
    for name in MONITOR_COLUMNS:
        pretty_table.add_row([name, f"{getattr(record, name):.10g}"])
    return f"```md\n{pretty_table}```"


def cmd_run(config_path: str, out: Optional[str] = None, mode: Optional[str] = None, threads: int = 1) -> int:
    if threads < 1:
        raise ConfigError(f"--threads must be positive, got {threads}")
    config = load_run_config(config_path, mode, out)
    if threads > 1:
        logger.info(f"A single run steps sequentially, ignoring --threads {threads}")
    params = config.params
    report = check_constraints(params)
    print(report.format_table())
    initial = config.initial_state()
    initial_u = to_u(initial, params) if initial.form == Form.W else initial
    initial_report = validate_initial(initial_u, params, damping_free=params.r0 == params.r1 == 0)

    trajectory = integrate(initial, params, config.integrator)

    config.output_dir.mkdir(parents=True, exist_ok=True)
    write_monitor_csv(config.output_dir / MONITOR_FILE, trajectory.records)
    write_snapshot(config.output_dir / SNAPSHOT_FILE, _final_snapshot(trajectory))
    write_json(config.output_dir / SUMMARY_FILE, run_summary(trajectory, params, initial_report.to_dict()))
    print(_status_table(trajectory))
    logger.info(f"Wrote {MONITOR_FILE}, {SNAPSHOT_FILE} and {SUMMARY_FILE} to {config.output_dir}")

    if trajectory.status == Status.POSITIVITY_FAILURE:
        logger.error(trajectory.message)
        return EXIT_POSITIVITY
    if trajectory.status != Status.COMPLETED:
        logger.error(trajectory.message)
        return EXIT_FAILED
    bounds = monitor_bounds(trajectory)
    if not bounds.passed:
        logger.error(f"Monitored functionals left their bounds: {bounds.to_dict()}")
        return EXIT_FAILED
    return EXIT_OK


def cmd_verify(config_path: Optional[str] = None, out: Optional[str] = None, threads: Optional[int] = None) -> int:
    config = load_suite_config(config_path, threads)
    output_dir = suite_output_dir(config_path, out)
    reports = asyncio.run(run_suites(config))

    output_dir.mkdir(parents=True, exist_ok=True)
    write_suite_report(output_dir / SUITE_REPORT_FILE, reports)
    write_results_jsonl(output_dir / SUITE_RESULTS_FILE, reports)
    for report in reports:
        print(f"{report.suite}: {'passed' if report.passed else 'FAILED'}")
        print(report.format_table())
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAILED


def _sweep_point(config, point: Dict[str, float]) -> dict:
    row = dict(point)
    try:
        params = config.params.replace(**point)
        initial = config.initial_state(params)
        trajectory = integrate(initial, params, config.integrator)
    except QnsError as e:
        logger.warning(f"Sweep point {point} failed: {e}")
        row.update(status="error", message=str(e))
        return row
    sup = trajectory.summary()["sup"]
    row.update(status=trajectory.status.value, message=trajectory.message, steps=trajectory.steps)
    row["rho_min"] = trajectory.rho_band[0]
    row.update({f"sup_{name}": sup[name] for name in SWEEP_COLUMNS})
    return row


def cmd_sweep(config_path: str, out: Optional[str] = None, mode: Optional[str] = None, threads: int = 1) -> int:
    config = load_run_config(config_path, mode, out)
    points = config.sweep_points()
    started = arrow.utcnow()
    logger.info(f"Sweeping {len(points)} point(s) over {sorted(config.sweep)} with {threads} thread(s)")
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        rows: List[dict] = list(pool.map(lambda p: _sweep_point(config, p), points))

    axes = [axis for axis in SWEEP_AXES if axis in config.sweep]
    columns = axes + ["status", "message", "steps", "rho_min"] + [f"sup_{name}" for name in SWEEP_COLUMNS]
    config.output_dir.mkdir(parents=True, exist_ok=True)
    with atomic_write(str(config.output_dir / SWEEP_FILE), overwrite=True, newline="") as f:
        writer = csv.DictWriter(f, fieldnames=columns, restval="")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})

    pretty_table = PrettyTable(field_names=axes + ["status", "rho_min", "sup_energy"])
    pretty_table.border = False
    for row in rows:
        pretty_table.add_row(
            [row[a] for a in axes] + [row["status"], row.get("rho_min", "-"), row.get("sup_energy", "-")]
        )
    print(f"```md\n{pretty_table}```")
    failed = [row for row in rows if row["status"] != Status.COMPLETED.value]
    logger.info(f"Sweep finished with {len(failed)} failed run(s), started {started.humanize()}")
    return EXIT_FAILED if failed else EXIT_OK


def cmd_report(monitor_path: str, columns: Optional[Sequence[str]] = None) -> int:
    path = Path(monitor_path)
    if path.is_dir():
        path = path / MONITOR_FILE
    records = read_monitor_csv(path)
    columns = [c for c in MonitorRecord.columns() if c != "time"] if columns is None else list(columns)
    unknown = set(columns) - set(MonitorRecord.columns())
    if unknown:
        raise ConfigError(f"Unknown monitor columns {sorted(unknown)}")
    table = format_records(records, columns)
    text = f"# Monitor report\n\n{len(records)} records, t = {records[0].time:g} .. {records[-1].time:g}\n\n{table}\n"
    with atomic_write(str(path.parent / REPORT_FILE), overwrite=True) as f:
        f.write(text)
    print(table)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qns", description="Quantum Navier-Stokes simulator and verification lab")
    parser.add_argument("--verbose", action="store_true", help="log to stdout at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="integrate one configuration")
    sweep = commands.add_parser("sweep", help="integrate every point of a parameter grid")
    for sub in (run, sweep):
        sub.add_argument("--config", required=True, help="run config JSON")
        sub.add_argument("--out", help="output directory")
        sub.add_argument("--mode", choices=["desk", "paper"], help="parameter constants")
        sub.add_argument("--threads", type=int, default=1, help="parallel runs (sweep only, a run is sequential)")

    verify = commands.add_parser("verify", help="run the verification suites")
    verify.add_argument("--config", help="suite config JSON (defaults when omitted)")
    verify.add_argument("--out", help="output directory")
    verify.add_argument("--threads", type=int, help="worker threads")

    report = commands.add_parser("report", help="summarize a monitor CSV")
    report.add_argument("monitor", help="monitor CSV or the directory holding it")
    report.add_argument("--columns", nargs="+", help="monitor columns to tabulate")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config, args.out, args.mode, args.threads)
        if args.command == "sweep":
            return cmd_sweep(args.config, args.out, args.mode, args.threads)
        if args.command == "verify":
            return cmd_verify(args.config, args.out, args.threads)
        return cmd_report(args.monitor, args.columns)
    except (ConfigError, AdmissibilityError, FormulationError, VacuumError) as e:
        logger.error(str(e))
        return EXIT_CONFIG
    except PositivityFailure as e:
        logger.error(f"Positivity failure at t={e.time}: {e.count} node(s), rho_min={e.rho_min}")
        return EXIT_POSITIVITY
    except Exception as e:
        write_error(e)
        return EXIT_FAILED
