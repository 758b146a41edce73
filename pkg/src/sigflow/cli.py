"""Command line interface.

Subcommands:
  simulate      run a scenario file and write snapshots, report, and plots
  verify-oracle compare the finite-volume solver against the mass-coordinate
                reference solution at two resolutions
  validate      check a scenario file and print every violation
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import lagrangian as lag
from . import orchestrator as orch
from .domain import RoadGrid, initial_state, validate_scenario
from .hyperbolic import INFLOW, OUTFLOW, HyperbolicBoundary, solve_hyperbolic
from .output import emit_plot, write_report, write_snapshot
from .scenario_io import ScenarioFileError, parse_scenario

log = logging.getLogger("sigflow")


def _setup_logging():
    level = os.environ.get("SIGFLOW_LOG", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )


def _load_scenario(path: str, nx=None, model=None):
    try:
        text = Path(path).read_text()
    except OSError as e:
        print(f"error: cannot read config {path}: {e}", file=sys.stderr)
        return None
    try:
        scenario = parse_scenario(text)
    except ScenarioFileError as e:
        for err in e.errors:
            print(f"error: {err}", file=sys.stderr)
        return None
    if nx is not None:
        grid = scenario.grid
        scenario = replace(scenario, grid=RoadGrid(grid.x_min, grid.x_max, nx))
    if model is not None:
        scenario = replace(scenario, model=model)
    return scenario


def cmd_simulate(args) -> int:
    scenario = _load_scenario(args.config, nx=args.nx, model=args.model)
    if scenario is None:
        return 2
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    try:
        traj = orch.run(scenario)
    except orch.PhaseError as e:
        log.error("run failed in phase %s: %s", e.phase, e.cause)
        write_report(None, out / "report.json", failed_phase=e.phase, error=str(e.cause))
        return 1
    except orch.ScenarioError as e:
        for v in e.violations:
            print(f"error: {v}", file=sys.stderr)
        return 2
    elapsed = time.perf_counter() - t0
    log.info("run finished in %.2f s", elapsed)

    try:
        for phase in traj.phases:
            for i, snap in enumerate(phase.snapshots):
                write_snapshot(snap, out / f"{phase.name}_{i:04d}.csv")
        write_report(traj, out / "report.json", timings={"total": elapsed})
        if args.plot:
            emit_plot(traj, args.plot, out / f"plot_{args.plot}.csv",
                      out / f"plot_{args.plot}.svg")
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1

    if args.oracle_check:
        code = _oracle_check(scenario)
        if code != 0:
            return code
    print(f"simulation complete: {len(traj.phases)} phases written to {out}")
    return 0


def _oracle_errors(scenario, n_cells: int):
    """L1(rho), L1(v) between the finite-volume run and the mass-coordinate
    reference on an n_cells grid, at the free-flow handoff time."""
    grid = RoadGrid(scenario.grid.x_min, scenario.grid.x_max, n_cells)
    s = replace(scenario, grid=grid)
    t_end = s.timing.t0 - s.timing.tau0
    init = initial_state(s)

    t_star = lag.estimate_breakdown_time(init, s.force)
    if t_end >= 0.5 * t_star:
        raise ValueError(
            f"horizon {t_end} is past half the characteristic-crossing estimate "
            f"{t_star}; the smooth reference solution is not valid there"
        )

    bc = HyperbolicBoundary(left=INFLOW, right=OUTFLOW, inflow=s.inflow)
    fv = solve_hyperbolic(init, bc, s.force, t_end, cfl=s.cfl)

    fine = RoadGrid(grid.x_min, grid.x_max, 4 * n_cells)
    fine_init = initial_state(replace(s, grid=fine))
    field = lag.to_mass_coordinates(fine_init)
    n_steps = max(200, int(t_end / 0.01))
    field = lag.advance_characteristics(field, s.inflow, s.force, t_end, n_steps)
    ref = lag.reconstruct_physical(field, grid)

    length = grid.x_max - grid.x_min
    l1_rho = float(np.sum(np.abs(fv.final.rho - ref.rho)) * grid.dx / length)
    l1_v = float(np.sum(np.abs(fv.final.v - ref.v)) * grid.dx / length)
    return l1_rho, l1_v


def _oracle_check(scenario) -> int:
    violations = validate_scenario(scenario, oracle_requested=True)
    if violations:
        for v in violations:
            print(f"error: {v}", file=sys.stderr)
        return 2
    n = scenario.grid.n_cells
    try:
        coarse = _oracle_errors(scenario, n)
        fine = _oracle_errors(scenario, 2 * n)
    except (ValueError, lag.BreakdownError, lag.PositivityError) as e:
        print(f"error: oracle comparison failed: {e}", file=sys.stderr)
        return 1
    print(f"oracle check, n={n}:   L1(rho)={coarse[0]:.6e}  L1(v)={coarse[1]:.6e}")
    print(f"oracle check, n={2*n}: L1(rho)={fine[0]:.6e}  L1(v)={fine[1]:.6e}")
    ratio = coarse[0] / fine[0] if fine[0] > 0 else float("inf")
    print(f"refinement ratio (rho): {ratio:.2f}")
    return 0


def cmd_verify_oracle(args) -> int:
    scenario = _load_scenario(args.config)
    if scenario is None:
        return 2
    return _oracle_check(scenario)


def cmd_validate(args) -> int:
    scenario = _load_scenario(args.config)
    if scenario is None:
        return 2
    violations = validate_scenario(scenario)
    if violations:
        for v in violations:
            print(f"violation: {v}")
        return 1
    print("scenario is valid")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sigflow",
        description="1-D traffic flow through a signalized intersection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario and write outputs")
    sim.add_argument("--config", required=True, help="scenario YAML file")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument("--model", choices=["first", "second"], default=None,
                     help="override the scenario's model variant")
    sim.add_argument("--nx", type=int, default=None, help="override grid resolution")
    sim.add_argument("--oracle-check", action="store_true",
                     help="also compare the free-flow phase against the reference solution")
    sim.add_argument("--plot", choices=["rho", "v"], default=None,
                     help="emit space-time plot data for this field")
    sim.set_defaults(func=cmd_simulate)

    ver = sub.add_parser("verify-oracle",
                         help="compare solver vs reference solution at two resolutions")
    ver.add_argument("--config", required=True)
    ver.set_defaults(func=cmd_verify_oracle)

    val = sub.add_parser("validate", help="validate a scenario file")
    val.add_argument("--config", required=True)
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
