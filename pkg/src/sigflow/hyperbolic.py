"""First-order conservative finite-volume solver for the pressureless flow.

Conserved variables are cell mass density m = rho and momentum q = rho*v;
with a constant pressure law the flux is (rho*v, rho*v^2) and the interface
flux is Rusanov (local Lax-Friedrichs), which keeps density concentrations
bounded on the grid.  The driver force enters through Godunov splitting:
transport first, then the pointwise source q += dt*m*F(v), so spatially
uniform acceleration is integrated exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .domain import VACUUM_RHO, BoundaryData, FlowState, ForceLaw, RoadGrid

# Wave-speed floor used for the CFL step when everything is stopped.
SPEED_FLOOR = 1e-8

INFLOW = "inflow"
OUTFLOW = "outflow"
VACUUM = "vacuum"


@dataclass(frozen=True)
class HyperbolicBoundary:
    """Boundary closure tags: left is inflow or vacuum, right is outflow or vacuum."""

    left: str = INFLOW
    right: str = OUTFLOW
    inflow: Optional[BoundaryData] = None

    def __post_init__(self):
        if self.left not in (INFLOW, VACUUM):
            raise ValueError(f"left boundary must be inflow or vacuum, got {self.left!r}")
        if self.right not in (OUTFLOW, VACUUM):
            raise ValueError(
                f"right boundary must be outflow or vacuum, got {self.right!r}"
            )
        if self.left == INFLOW and self.inflow is None:
            raise ValueError("inflow boundary requires BoundaryData")


@dataclass(frozen=True)
class ConservedState:
    """Cell-averaged mass and momentum at one time instant."""

    grid: RoadGrid
    m: np.ndarray
    q: np.ndarray
    t: float

    @staticmethod
    def from_flow_state(state: FlowState) -> "ConservedState":
        m = np.array(state.rho, dtype=float)
        q = m * state.v
        q[m <= VACUUM_RHO] = 0.0
        return ConservedState(state.grid, m, q, state.t)

    def velocities(self) -> np.ndarray:
        v = np.zeros_like(self.m)
        occupied = self.m > VACUUM_RHO
        v[occupied] = self.q[occupied] / self.m[occupied]
        return v

    def to_flow_state(self) -> FlowState:
        return FlowState(self.grid, self.m.copy(), self.velocities(), self.t)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.m) * self.grid.dx)


@dataclass
class StepReport:
    """Boundary mass fluxes integrated over one step, plus clamped mass."""

    inflow: float = 0.0   # veh entering through the left face
    outflow: float = 0.0  # veh leaving through the right face
    clamped: float = 0.0  # veh added when lifting negative cells to zero


@dataclass
class MassLedger:
    """Cumulative boundary-flux ledger recorded alongside each snapshot."""

    records: list = field(default_factory=list)
    inflow_cum: float = 0.0
    outflow_cum: float = 0.0
    clamped_cum: float = 0.0

    def absorb(self, report: StepReport):
        self.inflow_cum += report.inflow
        self.outflow_cum += report.outflow
        self.clamped_cum += report.clamped

    def record(self, t: float, total_mass: float):
        self.records.append(
            {
                "t": t,
                "total_mass": total_mass,
                "inflow_cum": self.inflow_cum,
                "outflow_cum": self.outflow_cum,
                "clamped_cum": self.clamped_cum,
            }
        )


@dataclass
class SolveResult:
    """Snapshots plus the mass ledger for one solver run."""

    snapshots: list
    ledger: list
    influx: float
    outflux: float
    clamped: float
    metadata: dict = field(default_factory=dict)

    @property
    def final(self) -> FlowState:
        return self.snapshots[-1]


def numerical_flux(rho_l, v_l, rho_r, v_r):
    """Rusanov flux for the pressureless system; vectorized over faces.

    Returns (mass_flux, momentum_flux).  Consistent with the exact flux
    (rho*v, rho*v^2) and identically zero on vacuum-vacuum faces.
    """
    rho_l = np.asarray(rho_l, dtype=float)
    v_l = np.asarray(v_l, dtype=float)
    rho_r = np.asarray(rho_r, dtype=float)
    v_r = np.asarray(v_r, dtype=float)
    s = np.maximum(np.abs(v_l), np.abs(v_r))
    q_l = rho_l * v_l
    q_r = rho_r * v_r
    f_mass = 0.5 * (q_l + q_r) - 0.5 * s * (rho_r - rho_l)
    f_mom = 0.5 * (q_l * v_l + q_r * v_r) - 0.5 * s * (q_r - q_l)
    return f_mass, f_mom


def cfl_dt(state: FlowState, cfl: float) -> float:
    """Largest stable time step at the given CFL ratio."""
    if not 0 < cfl <= 1:
        raise ValueError(f"cfl must lie in (0, 1], got {cfl}")
    vmax = max(float(np.max(np.abs(state.v))), SPEED_FLOOR)
    return cfl * state.grid.dx / vmax


def _ghosts(state: ConservedState, boundary: HyperbolicBoundary, t: float):
    v = state.velocities()
    if boundary.left == INFLOW:
        # Sampled at the step start: the interior data also represents time t
        # (the force source has already been applied), so this keeps spatially
        # uniform accelerating states exactly uniform.
        lg = (float(boundary.inflow.rho_in(t)), float(boundary.inflow.v_in(t)))
    else:
        lg = (0.0, 0.0)
    if boundary.right == OUTFLOW:
        rg = (float(state.m[-1]), float(v[-1]))
    else:
        rg = (0.0, 0.0)
    return lg, rg, v


def step(
    state: ConservedState,
    dt: float,
    boundary: HyperbolicBoundary,
    force: Optional[ForceLaw],
) -> tuple[ConservedState, StepReport]:
    """One first-order finite-volume update: transport, then force source."""
    grid = state.grid
    dx = grid.dx
    (rho_lg, v_lg), (rho_rg, v_rg), v = _ghosts(state, boundary, state.t)

    smax = max(float(np.max(np.abs(v))), abs(v_lg), abs(v_rg))
    if smax > 0 and dt * smax / dx > 1.01:
        raise ValueError(
            f"dt = {dt} violates the CFL bound dx/smax = {dx / smax} by more than 1%"
        )

    rho_ext = np.concatenate(([rho_lg], state.m, [rho_rg]))
    v_ext = np.concatenate(([v_lg], v, [v_rg]))
    f_mass, f_mom = numerical_flux(rho_ext[:-1], v_ext[:-1], rho_ext[1:], v_ext[1:])

    m_new = state.m - (dt / dx) * np.diff(f_mass)
    q_new = state.q - (dt / dx) * np.diff(f_mom)

    report = StepReport(inflow=dt * float(f_mass[0]), outflow=dt * float(f_mass[-1]))

    neg = m_new < 0
    if np.any(neg):
        report.clamped = float(-np.sum(m_new[neg]) * dx)
        m_new[neg] = 0.0
    vac = m_new <= VACUUM_RHO
    q_new[vac] = 0.0

    if force is not None:
        occupied = ~vac
        v_mid = np.zeros_like(m_new)
        v_mid[occupied] = q_new[occupied] / m_new[occupied]
        q_new = q_new + dt * m_new * force(np.maximum(v_mid, 0.0))

    return ConservedState(grid, m_new, q_new, state.t + dt), report


def solve_hyperbolic(
    initial: FlowState,
    boundary: HyperbolicBoundary,
    force: Optional[ForceLaw],
    t_end: float,
    cfl: float = 0.5,
    snapshot_interval: Optional[float] = None,
) -> SolveResult:
    """Advance the pressureless system from initial.t to t_end.

    Snapshots are taken at the requested cadence and at t_end exactly (the
    final step is shortened to land there).  Each snapshot carries a mass
    ledger entry with cumulative boundary fluxes.
    """
    if t_end < initial.t:
        raise ValueError(f"t_end = {t_end} precedes initial time {initial.t}")
    state = ConservedState.from_flow_state(initial)
    ledger = MassLedger()
    snapshots = [state.to_flow_state()]
    ledger.record(state.t, state.total_mass)

    horizon = t_end - initial.t
    if snapshot_interval is None or snapshot_interval <= 0:
        snapshot_interval = horizon if horizon > 0 else 1.0

    t_start = initial.t
    k_snap = 1
    while state.t < t_end - 1e-13:
        t_next = min(t_start + k_snap * snapshot_interval, t_end)
        dt = min(cfl_dt(state.to_flow_state(), cfl), t_next - state.t)
        state, report = step(state, dt, boundary, force)
        ledger.absorb(report)
        if state.t >= t_next - 1e-13:
            # land exactly on the snapshot time so phase handoffs compare equal
            state = ConservedState(state.grid, state.m, state.q, t_next)
            snapshots.append(state.to_flow_state())
            ledger.record(state.t, state.total_mass)
            k_snap += 1

    return SolveResult(
        snapshots=snapshots,
        ledger=ledger.records,
        influx=ledger.inflow_cum,
        outflux=ledger.outflow_cum,
        clamped=ledger.clamped_cum,
        metadata={"solver": "hyperbolic", "cfl": cfl},
    )
