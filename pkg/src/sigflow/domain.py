"""Core value types for the signalized-intersection traffic model.

Everything here is an immutable value object: grids, flow states, the
driver acceleration law, signal timing, the braking boundary, and the
full scenario description consumed by the solvers.  Units are SI
throughout (m, s, veh/m).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Optional

import numpy as np

# Tolerance for the braking-velocity compatibility check at the start of
# the prohibitive phase (the handoff velocity is a computed quantity).
COMPAT_TOL = 1e-6

# Cells with less mass than this are treated as vacuum (v := 0).
VACUUM_RHO = 1e-12


def sample_profile(fn: Callable[[float], float], xs: np.ndarray) -> np.ndarray:
    """Evaluate a profile callable on an array, accepting scalar-only callables."""
    xs = np.asarray(xs, dtype=float)
    try:
        out = np.asarray(fn(xs), dtype=float)
        if out.shape == xs.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(fn(x)) for x in xs], dtype=float)


@dataclass(frozen=True)
class RoadGrid:
    """Uniform cell grid on [x_min, x_max]."""

    x_min: float
    x_max: float
    n_cells: int

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise ValueError(f"x_max ({self.x_max}) must exceed x_min ({self.x_min})")
        if self.n_cells < 4:
            raise ValueError(f"n_cells must be >= 4, got {self.n_cells}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.n_cells

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.n_cells) + 0.5) * self.dx

    @property
    def faces(self) -> np.ndarray:
        return self.x_min + np.arange(self.n_cells + 1) * self.dx


@dataclass(frozen=True)
class FlowState:
    """Density and velocity sampled on a grid at one time instant."""

    grid: RoadGrid
    rho: np.ndarray
    v: np.ndarray
    t: float

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=float)
        v = np.asarray(self.v, dtype=float)
        n = self.grid.n_cells
        if rho.shape != (n,) or v.shape != (n,):
            raise ValueError(
                f"rho/v must have {n} entries, got {rho.shape} and {v.shape}"
            )
        if not (np.all(np.isfinite(rho)) and np.all(np.isfinite(v))):
            raise ValueError("rho and v must be finite")
        if rho.min(initial=0.0) < 0.0:
            raise ValueError(f"negative density: min rho = {rho.min()}")
        if v.min(initial=0.0) < -1e-9:
            raise ValueError(f"negative velocity: min v = {v.min()}")
        # Round tiny solver noise up to the admissible set.
        v = np.where(v < 0.0, 0.0, v)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "v", v)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.rho) * self.grid.dx)


@dataclass(frozen=True)
class ForceLaw:
    """Piecewise driver acceleration: constant f0 at low speed, zero above
    the speed limit v_star, linear ramp on the closing interval of width delta."""

    f0: float
    v_star: float
    delta: float

    def __post_init__(self):
        if not self.f0 > 0:
            raise ValueError(f"f0 must be positive, got {self.f0}")
        if not 0 < self.delta < self.v_star:
            raise ValueError(
                f"need 0 < delta < v_star, got delta={self.delta}, v_star={self.v_star}"
            )

    def __call__(self, v):
        return evaluate_force(self, v)


def evaluate_force(law: ForceLaw, v):
    """Acceleration applied by drivers at speed v (vectorized, total on v >= 0)."""
    v = np.asarray(v, dtype=float)
    ramp = law.f0 * (law.v_star - v) / law.delta
    out = np.clip(ramp, 0.0, law.f0)
    out = np.where(v < law.v_star - law.delta, law.f0, out)
    out = np.where(v > law.v_star, 0.0, out)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class SignalTiming:
    """Intersection position and red-phase timing.

    x0: light position; t0: red onset; tau0: braking lead time;
    tau1: red duration; h: length of the braking approach zone.
    """

    x0: float
    t0: float
    tau0: float
    tau1: float
    h: float

    def __post_init__(self):
        if not (self.t0 > self.tau0 > 0):
            raise ValueError(f"need t0 > tau0 > 0, got t0={self.t0}, tau0={self.tau0}")
        if not self.tau1 > 0:
            raise ValueError(f"tau1 must be positive, got {self.tau1}")
        if not 0 < self.h < self.x0:
            raise ValueError(f"need 0 < h < x0, got h={self.h}, x0={self.x0}")


@dataclass(frozen=True)
class BrakingProfile:
    """Moving braking boundary gamma(t) with prescribed velocity V(t),
    both defined on [t0 - tau0, infinity)."""

    gamma: Callable[[float], float]
    V: Callable[[float], float]


@dataclass(frozen=True)
class BoundaryData:
    """Upstream inflow data: density and velocity as functions of time."""

    rho_in: Callable[[float], float]
    v_in: Callable[[float], float]


def default_braking_profile(timing: SignalTiming, v_handoff: float) -> BrakingProfile:
    """Cosine-ease braking boundary.

    gamma rises from x0 - h to x0 over the flashing-green interval and
    stays at x0 afterwards; V eases from v_handoff down to 0 on the same
    interval and is identically 0 from t0 on.  C1-smooth, so the boundary
    velocity and position are compatible with the handoff by construction.
    """
    if v_handoff < 0:
        raise ValueError(f"v_handoff must be >= 0, got {v_handoff}")
    if timing.tau0 <= 0:
        raise ValueError(f"tau0 must be positive, got {timing.tau0}")
    x0, h, t0, tau0 = timing.x0, timing.h, timing.t0, timing.tau0
    t_start = t0 - tau0

    def ease(t: float) -> float:
        # 1 at t_start, 0 at t0, clamped outside.
        if t <= t_start:
            return 1.0
        if t >= t0:
            return 0.0
        return (1.0 + math.cos(math.pi * (t - t_start) / tau0)) / 2.0

    def gamma(t: float) -> float:
        if t >= t0:
            return x0
        return x0 - h * ease(t)

    def velocity(t: float) -> float:
        if t >= t0:
            return 0.0
        return v_handoff * ease(t)

    return BrakingProfile(gamma=gamma, V=velocity)


@dataclass(frozen=True)
class Scenario:
    """Full problem description for one signal cycle."""

    model: str  # "first" or "second"
    grid: RoadGrid
    rho0: Callable[[float], float]
    v0: Callable[[float], float]
    inflow: BoundaryData
    timing: SignalTiming
    force: Optional[ForceLaw]
    mu: float
    t_end: float
    braking: Optional[BrakingProfile] = None
    cfl: float = 0.5
    parabolic_dt: float = 1e-3
    snapshot_interval: float = 1.0
    source: Optional[Mapping] = field(default=None, compare=False)


def initial_state(scenario: Scenario) -> FlowState:
    grid = scenario.grid
    return FlowState(
        grid=grid,
        rho=sample_profile(scenario.rho0, grid.centers),
        v=sample_profile(scenario.v0, grid.centers),
        t=0.0,
    )


def validate_scenario(s: Scenario, oracle_requested: bool = False) -> list[str]:
    """Collect every invariant violation in the scenario; empty means valid.

    Violations are data, not failures: each entry names the offending
    field and the condition it breaks.
    """
    out: list[str] = []

    if s.model not in ("first", "second"):
        out.append(f"model: must be 'first' or 'second', got {s.model!r}")
    if not s.mu > 0:
        out.append(f"mu: viscosity must be positive, got {s.mu}")
    if not 0 < s.cfl <= 1:
        out.append(f"cfl: must lie in (0, 1], got {s.cfl}")
    if not s.parabolic_dt > 0:
        out.append(f"parabolic_dt: must be positive, got {s.parabolic_dt}")
    if not s.snapshot_interval > 0:
        out.append(f"snapshot_interval: must be positive, got {s.snapshot_interval}")

    tm = s.timing
    if not s.t_end >= tm.t0 + tm.tau1:
        out.append(
            f"t_end: must reach the end of the red phase t0 + tau1 = "
            f"{tm.t0 + tm.tau1}, got {s.t_end}"
        )
    g = s.grid
    if not g.x_min < tm.x0 - tm.h:
        out.append(
            f"timing.x0/h: braking zone start x0 - h = {tm.x0 - tm.h} must lie "
            f"inside the grid (x_min = {g.x_min})"
        )
    if not tm.x0 < g.x_max:
        out.append(f"timing.x0: light position {tm.x0} must lie below x_max = {g.x_max}")

    xs = g.centers
    rho0 = sample_profile(s.rho0, xs)
    v0 = sample_profile(s.v0, xs)
    if np.any(rho0 < 0) or not np.all(np.isfinite(rho0)):
        out.append("rho0: initial density must be finite and non-negative everywhere")
    if np.any(v0 < 0) or not np.all(np.isfinite(v0)):
        out.append("v0: initial velocity must be finite and non-negative everywhere")
    if oracle_requested and np.any(rho0 <= 0):
        out.append(
            "rho0: initial density must be strictly positive everywhere when the "
            "mass-coordinate reference solution is requested (the coordinate "
            "transformation is otherwise not invertible)"
        )

    ts = np.linspace(0.0, s.t_end, 64)
    rho_in = sample_profile(s.inflow.rho_in, ts)
    v_in = sample_profile(s.inflow.v_in, ts)
    if np.any(rho_in < 0):
        out.append("inflow.rho_in: boundary density must be non-negative for all t")
    if np.any(v_in < 0):
        out.append("inflow.v_in: boundary velocity must be non-negative for all t")

    if s.braking is not None:
        out.extend(_check_braking(s.braking, tm))

    return out


def _check_braking(b: BrakingProfile, tm: SignalTiming) -> list[str]:
    out: list[str] = []
    t_start = tm.t0 - tm.tau0
    if abs(b.gamma(t_start) - (tm.x0 - tm.h)) > 1e-9:
        out.append(
            f"braking.gamma: must start at x0 - h = {tm.x0 - tm.h}, "
            f"got {b.gamma(t_start)}"
        )
    for t in (tm.t0, tm.t0 + 0.5 * tm.tau1, tm.t0 + tm.tau1):
        if abs(b.gamma(t) - tm.x0) > 1e-9:
            out.append(
                f"braking.gamma: must sit at the light x0 = {tm.x0} for t >= t0, "
                f"got gamma({t}) = {b.gamma(t)}"
            )
            break
    ts = np.linspace(t_start, tm.t0 + tm.tau1, 128)
    gam = sample_profile(b.gamma, ts)
    if np.any(np.diff(gam) < -1e-9):
        out.append("braking.gamma: boundary position must be non-decreasing")
    vel = sample_profile(b.V, ts)
    if np.any(vel < 0):
        out.append("braking.V: prescribed boundary velocity must be non-negative")
    for t in (tm.t0, tm.t0 + 0.5 * tm.tau1, tm.t0 + tm.tau1):
        if abs(b.V(t)) > 0:
            out.append(
                f"braking.V: traffic must be stopped at the light from t0 on "
                f"(V({t}) = {b.V(t)}, expected 0)"
            )
            break
    return out


def with_numerics(s: Scenario, **kw) -> Scenario:
    """Copy of the scenario with replaced fields (grid refinement etc.)."""
    return replace(s, **kw)
