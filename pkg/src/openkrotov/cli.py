"""Command-line front end: ``openkrotov {propagate,optimize,scan,controllability}``.

Exit codes: 0 on success, 1 on a runtime failure, 2 on a configuration or
validation error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import _kernels
from .config import ConfigError, RunConfig, load_config
from .controllability import connectivity_graph, lie_rank
from .dynamics import format_csv, observables, propagate_forward, trajectory_csv
from .krotov import krotov_iterate, scan_duration

logger = logging.getLogger("openkrotov")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _write(out: Path, name: str, text: str):
    (out / name).write_text(text)
    logger.info("wrote %s", out / name)


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _pulse_csv(field) -> str:
    header = ["t", *(f"u_{j + 1}" for j in range(field.n_controls))]
    return format_csv(header, np.column_stack([field.grid.control_times, field.samples.T]))


def _propagation_states(cfg: RunConfig):
    rho0, target = cfg.initial_state, cfg.target_state
    if cfg.objective is not None and cfg.objective.kind == "state":
        rho0 = rho0 if rho0 is not None else cfg.objective.initial
        target = target if target is not None else cfg.objective.target
    if rho0 is None:
        raise ConfigError("propagate needs 'initial_state' or a state objective")
    return np.array(rho0, dtype=complex), None if target is None else np.array(target, dtype=complex)


def run_propagate(cfg: RunConfig, out: Path) -> int:
    rho0, target = _propagation_states(cfg)
    traj = propagate_forward(cfg.generator(), cfg.guess_field(), rho0)
    _write(out, "trajectory.csv", trajectory_csv(traj))
    _write(out, "observables.csv", observables(traj, target).to_csv())
    return EXIT_OK


def run_optimize(cfg: RunConfig, out: Path) -> int:
    objective = cfg.control_objective()
    filters = cfg.filters() or None

    def report(info):
        logger.info(
            "iter %4d  F = %.10f  dF = %+.3e  max|du| = %.3e", info.iteration, info.fidelity,
            info.delta_f, info.max_du,
        )

    record = krotov_iterate(
        cfg.generator(), objective, cfg.guess_field(), cfg.krotov_options(), filters, callback=report
    )
    _write(out, "pulse.csv", _pulse_csv(record.field))
    table = record.convergence_table()
    # the seconds column is wall time and the only non-reproducible data
    _write(out, "convergence.csv", format_csv(["iter", "F", "dF", "J_spec", "max_du", "seconds"], table))
    summary = {
        "final_fidelity": record.final_fidelity,
        "iterations": record.n_iterations,
        "converged": record.converged,
        "monotone": record.monotone,
        "reason": record.reason,
        "spectral_warning": record.spectral_warning,
    }
    _write(out, "summary.json", _dump_json(summary))
    print(f"{record.reason}: F = {record.final_fidelity:.10f} after {record.n_iterations} iterations")
    return EXIT_OK


def run_scan(cfg: RunConfig, out: Path) -> int:
    if not cfg.t_list:
        raise ConfigError("scan needs 'scan': {'T_list': [...]}")
    rows = scan_duration(
        cfg.generator(), cfg.control_objective(), cfg.t_list, cfg.krotov_options(), cfg.guess_field()
    )
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["T", "F", "iters", "reason"])
    for row in rows:
        writer.writerow([f"{row.t_final:.15g}", f"{row.fidelity:.15g}", row.iterations, row.reason])
    _write(out, "scan.csv", buf.getvalue())
    for row in rows:
        print(f"T = {row.t_final:<10g} F = {row.fidelity:.8f}  ({row.iterations} iterations, {row.reason})")
    return EXIT_OK


def run_controllability(cfg: RunConfig, out: Path) -> int:
    gen = cfg.generator()
    report = lie_rank(gen.drift, gen.controls)
    graph = connectivity_graph(gen.drift, gen.controls)
    doc = report.to_dict()
    doc["components"] = [list(c) for c in graph.components]
    doc["edges"] = [list(e) for e in graph.edges]
    _write(out, "controllability.json", _dump_json(doc))
    print(report.summary())
    print(f"Coupling graph: {graph.n_components} connected component(s).")
    return EXIT_OK


COMMANDS = {
    "propagate": run_propagate,
    "optimize": run_optimize,
    "scan": run_scan,
    "controllability": run_controllability,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="openkrotov", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="output directory (overrides output_dir in the config)")
        p.add_argument("--threads", type=int, default=None, help="kernel threads, 0 for one per CPU")
        p.add_argument("--verbose", "-v", action="store_true")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.threads is not None:
            if args.threads < 0:
                raise ConfigError("--threads must be >= 0")
            _kernels.set_num_threads(args.threads)
        cfg = load_config(args.config)
        out = Path(args.out or cfg.output_dir or ".")
        out.mkdir(parents=True, exist_ok=True)
        logger.info("kernel backend: %s, %d thread(s)", _kernels.BACKEND, _kernels.get_num_threads())
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"openkrotov: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - report and map to the runtime exit code
        if args.verbose:
            logger.exception("run failed")
        print(f"openkrotov: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
