"""Full signal-cycle runs: free flow, flashing-green split, red-phase dual
flows, green-light merge, and resume.

The first model runs the hyperbolic solver outside the braking region and
the viscous solver upstream of the light; the second model runs the
viscous solver everywhere (with the driver force switched off upstream of
the light during the red phase).  The upstream and downstream red-phase
flows are independent sub-problems on overlapping strips; the merge
assigns the upstream solution below the light and the downstream solution
above it, which resolves the overlap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .domain import (
    BoundaryData,
    FlowState,
    RoadGrid,
    Scenario,
    default_braking_profile,
    initial_state,
    sample_profile,
    validate_scenario,
)
from . import hyperbolic as hyp
from . import parabolic as par


class ScenarioError(ValueError):
    """Raised when a scenario fails validation; carries the violation list."""

    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


class PhaseError(RuntimeError):
    """Raised when a solver fails inside a named phase."""

    def __init__(self, phase: str, cause: Exception):
        super().__init__(f"phase {phase!r} failed: {cause}")
        self.phase = phase
        self.cause = cause


@dataclass
class Phase:
    """One solved phase of the cycle, with its snapshots and mass ledger."""

    name: str
    solver: str
    t_start: float
    t_end: float
    snapshots: list
    ledger: list
    influx: float
    outflux: float
    clamped: float
    metadata: dict = field(default_factory=dict)

    @property
    def initial(self) -> FlowState:
        return self.snapshots[0]

    @property
    def final(self) -> FlowState:
        return self.snapshots[-1]


@dataclass
class Trajectory:
    """All phases of one run plus the cross-phase bookkeeping."""

    scenario: Scenario
    phases: list
    compatibility_residual: Optional[float]
    split_shift: float
    light_shift: float
    handoff_adjustments: dict

    def phase(self, name: str) -> Phase:
        for p in self.phases:
            if p.name == name:
                return p
        raise KeyError(name)

    @property
    def snapshots(self) -> list:
        out = []
        for p in self.phases:
            out.extend(p.snapshots)
        out.sort(key=lambda s: s.t)
        return out

    @property
    def final(self) -> FlowState:
        return self.phases[-1].final


def split_at(state: FlowState, x_split: float) -> tuple[FlowState, FlowState, float]:
    """Split a cell state at the face nearest x_split.

    Returns (upstream, downstream, shift), where shift is the snap distance
    to the nearest cell face.  The two halves partition the cells, so their
    masses sum to the original total exactly.
    """
    grid = state.grid
    i = int(round((x_split - grid.x_min) / grid.dx))
    face = grid.x_min + i * grid.dx
    shift = face - x_split
    if i < 4 or grid.n_cells - i < 4:
        raise ValueError(
            f"split at {x_split} leaves fewer than 4 cells on one side "
            f"(face index {i} of {grid.n_cells})"
        )
    up = FlowState(
        grid=RoadGrid(grid.x_min, face, i),
        rho=state.rho[:i].copy(),
        v=state.v[:i].copy(),
        t=state.t,
    )
    down = FlowState(
        grid=RoadGrid(face, grid.x_max, grid.n_cells - i),
        rho=state.rho[i:].copy(),
        v=state.v[i:].copy(),
        t=state.t,
    )
    return up, down, shift


def merge(
    upstream: FlowState,
    downstream: FlowState,
    target_grid: RoadGrid,
    x_light: float,
    t_merge: float,
) -> FlowState:
    """Merge the two red-phase flows onto one grid at the green-light time.

    Cells below the light take the upstream (braking) solution, cells at or
    above it take the downstream solution; the downstream strip below the
    light is discarded.  Values are copied where sample positions coincide
    and linearly interpolated otherwise.
    """
    if abs(upstream.t - t_merge) > 1e-12 or abs(downstream.t - t_merge) > 1e-12:
        raise ValueError(
            f"merge time mismatch: upstream t = {upstream.t}, downstream t = "
            f"{downstream.t}, expected {t_merge}"
        )
    xt = target_grid.centers
    below = xt < x_light
    rho = np.empty(target_grid.n_cells)
    v = np.empty(target_grid.n_cells)
    rho[below] = _resample(xt[below], upstream.grid.centers, upstream.rho)
    v[below] = _resample(xt[below], upstream.grid.centers, upstream.v)
    rho[~below] = _resample(xt[~below], downstream.grid.centers, downstream.rho)
    v[~below] = _resample(xt[~below], downstream.grid.centers, downstream.v)
    return FlowState(grid=target_grid, rho=rho, v=v, t=t_merge)


def _resample(xt: np.ndarray, xs: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Linear interpolation with an exact-copy fast path when the target
    positions are a contiguous run of the source positions."""
    if len(xt) == 0:
        return np.empty(0)
    scale = max(abs(xs[0]), abs(xs[-1]), 1.0)
    j = np.searchsorted(xs, xt[0] - 1e-9 * scale)
    if j + len(xt) <= len(xs) and np.allclose(
        xs[j : j + len(xt)], xt, rtol=0.0, atol=1e-9 * scale
    ):
        return vals[j : j + len(xt)].copy()
    return np.interp(xt, xs, vals)


def _phase(name: str, solver: str, t0: float, t1: float, res) -> Phase:
    return Phase(
        name=name,
        solver=solver,
        t_start=t0,
        t_end=t1,
        snapshots=res.snapshots,
        ledger=res.ledger,
        influx=res.influx,
        outflux=res.outflux,
        clamped=res.clamped,
        metadata=res.metadata,
    )


def _snapped_geometry(s: Scenario):
    grid = s.grid
    tm = s.timing
    i_split = int(round((tm.x0 - tm.h - grid.x_min) / grid.dx))
    i_light = int(round((tm.x0 - grid.x_min) / grid.dx))
    x_split = grid.x_min + i_split * grid.dx
    x_light = grid.x_min + i_light * grid.dx
    return x_split, x_light, x_split - (tm.x0 - tm.h), x_light - tm.x0


def _braking(s: Scenario, v_handoff: float):
    if s.braking is not None:
        return s.braking
    x_split, x_light, _, _ = _snapped_geometry(s)
    snapped = type(s.timing)(
        x0=x_light, t0=s.timing.t0, tau0=s.timing.tau0, tau1=s.timing.tau1,
        h=x_light - x_split,
    )
    return default_braking_profile(snapped, v_handoff)


def run_first_model(s: Scenario) -> Trajectory:
    """Hyperbolic free flow and downstream release, viscous braking flow."""
    violations = validate_scenario(s)
    if violations:
        raise ScenarioError(violations)
    tm = s.timing
    grid = s.grid
    x_split, x_light, split_shift, light_shift = _snapped_geometry(s)
    t_brake = tm.t0 - tm.tau0
    t_green = tm.t0 + tm.tau1

    open_bc = hyp.HyperbolicBoundary(left=hyp.INFLOW, right=hyp.OUTFLOW, inflow=s.inflow)

    # Phase 1: free flow on the full road up to the flashing green.
    try:
        free = hyp.solve_hyperbolic(
            initial_state(s), open_bc, s.force, t_brake,
            cfl=s.cfl, snapshot_interval=s.snapshot_interval,
        )
    except Exception as e:  # noqa: BLE001 - annotate the failing phase
        raise PhaseError("free_flow", e) from e
    phases = [_phase("free_flow", "hyperbolic", 0.0, t_brake, free)]

    up0, down0, _ = split_at(free.final, x_split)
    v_handoff = float(up0.v[-1])
    braking = _braking(s, v_handoff)

    # Phase 2a: braking flow upstream of the light, moving right boundary.
    domain = par.MovingDomain(left=grid.x_min, right_of_t=braking.gamma,
                              n_cells=up0.grid.n_cells)
    rho_b, v_b = _to_nodes(up0, domain, t_brake)
    pb = par.ParabolicBoundary(
        left_v=s.inflow.v_in, left_rho=s.inflow.rho_in, right_v=braking.V
    )
    try:
        upstream = par.solve_parabolic(
            rho_b, v_b, domain, pb, s.mu, None, t_brake, t_green,
            dt=s.parabolic_dt, snapshot_interval=s.snapshot_interval,
        )
    except Exception as e:  # noqa: BLE001
        raise PhaseError("upstream_braking", e) from e
    phases.append(_phase("upstream_braking", "parabolic", t_brake, t_green, upstream))

    # Phase 2b: released flow downstream, no traffic through the split point.
    vac_bc = hyp.HyperbolicBoundary(left=hyp.VACUUM, right=hyp.OUTFLOW)
    try:
        downstream = hyp.solve_hyperbolic(
            down0, vac_bc, s.force, t_green,
            cfl=s.cfl, snapshot_interval=s.snapshot_interval,
        )
    except Exception as e:  # noqa: BLE001
        raise PhaseError("downstream_release", e) from e
    phases.append(
        _phase("downstream_release", "hyperbolic", t_brake, t_green, downstream)
    )

    merged = merge(upstream.snapshots[-1], downstream.final, grid, x_light, t_green)

    # Phase 3: resume free flow on the full road.
    try:
        resume = hyp.solve_hyperbolic(
            merged, open_bc, s.force, s.t_end,
            cfl=s.cfl, snapshot_interval=s.snapshot_interval,
        )
    except Exception as e:  # noqa: BLE001
        raise PhaseError("resume", e) from e
    phases.append(_phase("resume", "hyperbolic", t_green, s.t_end, resume))

    adjustments = _adjustments(free, upstream, downstream, resume)
    return Trajectory(
        scenario=s,
        phases=phases,
        compatibility_residual=upstream.metadata.get("compatibility_residual"),
        split_shift=split_shift,
        light_shift=light_shift,
        handoff_adjustments=adjustments,
    )


def run_second_model(s: Scenario) -> Trajectory:
    """Viscous equations on every phase; force off upstream during the red."""
    violations = validate_scenario(s)
    if violations:
        raise ScenarioError(violations)
    tm = s.timing
    grid = s.grid
    x_split, x_light, split_shift, light_shift = _snapped_geometry(s)
    t_brake = tm.t0 - tm.tau0
    t_green = tm.t0 + tm.tau1

    full = par.MovingDomain(left=grid.x_min, right_of_t=grid.x_max,
                            n_cells=grid.n_cells)
    open_bc = par.ParabolicBoundary.from_inflow(s.inflow)

    nodes0 = full.nodes(0.0)
    rho0 = sample_profile(s.rho0, nodes0)
    v0 = sample_profile(s.v0, nodes0)
    try:
        free = par.solve_parabolic(
            rho0, v0, full, open_bc, s.mu, s.force, 0.0, t_brake,
            dt=s.parabolic_dt, snapshot_interval=s.snapshot_interval,
        )
    except Exception as e:  # noqa: BLE001
        raise PhaseError("free_flow", e) from e
    phases = [_phase("free_flow", "parabolic", 0.0, t_brake, free)]

    free_x = free.final.grid.centers
    v_handoff = float(np.interp(x_split, free_x, free.final.v))
    braking = _braking(s, v_handoff)

    # Upstream braking flow (force off, moving boundary).
    n_up = max(4, int(round((x_split - grid.x_min) / grid.dx)))
    dom_up = par.MovingDomain(left=grid.x_min, right_of_t=braking.gamma, n_cells=n_up)
    up_nodes = dom_up.nodes(t_brake)
    rho_b = _resample(up_nodes, free_x, free.final.rho)
    v_b = _resample(up_nodes, free_x, free.final.v)
    pb = par.ParabolicBoundary(
        left_v=s.inflow.v_in, left_rho=s.inflow.rho_in, right_v=braking.V
    )
    try:
        upstream = par.solve_parabolic(
            rho_b, v_b, dom_up, pb, s.mu, None, t_brake, t_green,
            dt=s.parabolic_dt, snapshot_interval=s.snapshot_interval,
        )
    except Exception as e:  # noqa: BLE001
        raise PhaseError("upstream_braking", e) from e
    phases.append(_phase("upstream_braking", "parabolic", t_brake, t_green, upstream))

    # Downstream released flow: sealed left boundary (no traffic through it).
    n_down = max(4, grid.n_cells - int(round((x_split - grid.x_min) / grid.dx)))
    dom_down = par.MovingDomain(left=x_split, right_of_t=grid.x_max, n_cells=n_down)
    down_nodes = dom_down.nodes(t_brake)
    rho_c = _resample(down_nodes, free_x, free.final.rho)
    v_c = _resample(down_nodes, free_x, free.final.v)
    sealed = par.ParabolicBoundary(left_v=lambda t: 0.0, left_rho=lambda t: 0.0)
    try:
        downstream = par.solve_parabolic(
            rho_c, v_c, dom_down, sealed, s.mu, s.force, t_brake, t_green,
            dt=s.parabolic_dt, snapshot_interval=s.snapshot_interval,
        )
    except Exception as e:  # noqa: BLE001
        raise PhaseError("downstream_release", e) from e
    phases.append(
        _phase("downstream_release", "parabolic", t_brake, t_green, downstream)
    )

    merged = merge(
        upstream.snapshots[-1], downstream.snapshots[-1],
        par.node_grid(grid.x_min, grid.x_max, grid.n_cells), x_light, t_green,
    )

    try:
        resume = par.solve_parabolic(
            merged.rho, merged.v, full, open_bc, s.mu, s.force, t_green, s.t_end,
            dt=s.parabolic_dt, snapshot_interval=s.snapshot_interval,
        )
    except Exception as e:  # noqa: BLE001
        raise PhaseError("resume", e) from e
    phases.append(_phase("resume", "parabolic", t_green, s.t_end, resume))

    adjustments = _adjustments(free, upstream, downstream, resume)
    return Trajectory(
        scenario=s,
        phases=phases,
        compatibility_residual=upstream.metadata.get("compatibility_residual"),
        split_shift=split_shift,
        light_shift=light_shift,
        handoff_adjustments=adjustments,
    )


def _to_nodes(cells: FlowState, domain: par.MovingDomain, t: float):
    nodes = domain.nodes(t)
    xc = cells.grid.centers
    return _resample(nodes, xc, cells.rho), _resample(nodes, xc, cells.v)


def _adjustments(free, upstream, downstream, resume) -> dict:
    """Mass defects introduced by the split/merge resampling, measured with
    each phase's own discrete mass so the global ledger closes exactly."""
    split_adj = (
        upstream.ledger[0]["total_mass"]
        + downstream.ledger[0]["total_mass"]
        - free.ledger[-1]["total_mass"]
    )
    merge_adj = resume.ledger[0]["total_mass"] - (
        upstream.ledger[-1]["total_mass"] + downstream.ledger[-1]["total_mass"]
    )
    return {"split": split_adj, "merge": merge_adj}


def run(s: Scenario) -> Trajectory:
    if s.model == "second":
        return run_second_model(s)
    return run_first_model(s)


def mass_balance_report(traj: Trajectory) -> dict:
    """Per-phase and global mass accounting, machine readable.

    Each phase residual compares the mass change against the integrated
    boundary fluxes (plus clamped mass); the global residual additionally
    carries the recorded handoff adjustments from splitting and merging.
    """
    phases = []
    for p in traj.phases:
        m0 = p.ledger[0]["total_mass"]
        m1 = p.ledger[-1]["total_mass"]
        residual = (m1 - m0) - (p.influx - p.outflux + p.clamped)
        phases.append(
            {
                "name": p.name,
                "solver": p.solver,
                "t_start": p.t_start,
                "t_end": p.t_end,
                "initial_mass": m0,
                "final_mass": m1,
                "influx": p.influx,
                "outflux": p.outflux,
                "clamped": p.clamped,
                "residual": residual,
            }
        )
    m_start = traj.phases[0].ledger[0]["total_mass"]
    m_end = traj.phases[-1].ledger[-1]["total_mass"]
    net_flux = sum(p["influx"] - p["outflux"] + p["clamped"] for p in phases)
    adjustments = sum(traj.handoff_adjustments.values())
    global_residual = (m_end - m_start) - net_flux - adjustments
    return {
        "schema_version": 1,
        "phases": phases,
        "handoff_adjustments": dict(traj.handoff_adjustments),
        "global": {
            "initial_mass": m_start,
            "final_mass": m_end,
            "net_boundary_flux": net_flux,
            "handoff_adjustment": adjustments,
            "residual": global_residual,
        },
        "compatibility_residual": traj.compatibility_residual,
        "split_alignment_shift": traj.split_shift,
        "light_alignment_shift": traj.light_shift,
    }
