"""Transport line: left-sided upwind discretization of z_t + lam * z_x = 0.

Goods enter at x = 0 with the inflow control and leave at x = 1; the output
is the last cell's value.  At CFL number exactly 1 the upwind update
degenerates to a pure shift, so the discrete output reproduces the exact
delayed boundary trace u(t - 1/lam); that case gets a dedicated branch so
the shift is performed without rounding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError

_TIME_TOL = 1e-9
_CFL_TOL = 1e-12


def _as_int(x: float, name: str) -> int:
    n = round(x)
    if abs(x - n) > _TIME_TOL * max(1.0, abs(x)):
        raise ValidationError(f"{name} must be a whole number, got {x}")
    return int(n)


@dataclass(frozen=True)
class GridSpec:
    """Space-time grid over the unit-length line and the horizon [0, T]."""

    dx: float
    lam: float
    dt: float
    T: float

    def __post_init__(self):
        for name in ("dx", "lam", "dt", "T"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or v <= 0.0:
                raise ValidationError(f"grid {name} must be positive and finite, got {v}")
        if self.cfl > 1.0 + _CFL_TOL:
            raise ValidationError(
                f"CFL number lam*dt/dx = {self.cfl} exceeds 1 (unstable upwind step)")
        _as_int(1.0 / self.dx, "cell count 1/dx")
        _as_int(self.T / self.dt, "step count T/dt")
        _as_int(1.0 / (self.lam * self.dt), "transit step count 1/(lam*dt)")

    @property
    def cfl(self) -> float:
        return self.lam * self.dt / self.dx

    @property
    def n_cells(self) -> int:
        return _as_int(1.0 / self.dx, "cell count")

    @property
    def n_steps(self) -> int:
        return _as_int(self.T / self.dt, "step count")

    @property
    def transit_steps(self) -> int:
        """Number of time steps a good needs to traverse the line (1/(lam*dt))."""
        return _as_int(1.0 / (self.lam * self.dt), "transit step count")

    def step_of(self, t: float) -> int:
        """Grid step index of time ``t``; rejects off-grid times."""
        k = _as_int(t / self.dt, f"time {t} in units of dt")
        return k

    def times(self) -> np.ndarray:
        """All grid times 0, dt, ..., T."""
        return np.arange(self.n_steps + 1) * self.dt


@dataclass(frozen=True)
class ControlSchedule:
    """Piecewise-constant inflow: ``values[k]`` holds on [t_start + k dt, t_start + (k+1) dt).

    Lookups beyond the last step return the final value (the inflow is held
    once the control horizon ends); lookups before ``t_start`` are rejected.
    """

    t_start: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise ValidationError("schedule needs a 1-d, nonempty value array")
        if not np.all(np.isfinite(values)):
            raise ValidationError("schedule values must be finite")
        if self.dt <= 0.0 or not math.isfinite(self.dt):
            raise ValidationError(f"schedule dt must be positive, got {self.dt}")
        if self.t_start < -_TIME_TOL:
            raise ValidationError(f"schedule must not start before 0, got {self.t_start}")
        _as_int(self.t_start / self.dt, "schedule start in units of dt")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def start_step(self) -> int:
        return _as_int(self.t_start / self.dt, "schedule start step")

    @property
    def n_steps(self) -> int:
        return int(self.values.size)

    @property
    def end_time(self) -> float:
        return self.t_start + self.values.size * self.dt

    def value_for_step(self, k: int) -> float:
        """Inflow during step ``k`` (grid indexing); holds past the end."""
        j = k - self.start_step
        if j < 0:
            raise ValidationError(f"step {k} precedes the schedule start")
        return float(self.values[min(j, self.values.size - 1)])

    def value_at(self, t: float) -> float:
        """Inflow at time ``t``; right-continuous at step boundaries."""
        x = (t - self.t_start) / self.dt
        k = round(x)
        if abs(x - k) > _TIME_TOL:
            k = math.floor(x)
        return self.value_for_step(int(k) + self.start_step)


@dataclass(frozen=True)
class LineState:
    """Cell values of the line content after ``k`` completed steps."""

    grid: GridSpec
    z: np.ndarray
    k: int

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        if z.shape != (self.grid.n_cells,):
            raise ValidationError(
                f"state needs {self.grid.n_cells} cells, got shape {z.shape}")
        if not 0 <= self.k <= self.grid.n_steps:
            raise ValidationError(f"step counter {self.k} outside 0..{self.grid.n_steps}")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    @property
    def t(self) -> float:
        return self.k * self.grid.dt


def init_line(grid: GridSpec) -> LineState:
    """Empty line at t = 0."""
    return LineState(grid, np.zeros(grid.n_cells), 0)


def step(state: LineState, inflow: float) -> LineState:
    """Advance one upwind step with ghost-cell inflow z(0, t) = u(t)."""
    if state.k >= state.grid.n_steps:
        raise ValidationError(f"cannot step past the horizon T={state.grid.T}")
    if not math.isfinite(inflow):
        raise ValidationError(f"inflow must be finite, got {inflow}")
    z = state.z
    shifted = np.empty_like(z)
    shifted[0] = inflow
    shifted[1:] = z[:-1]
    cfl = state.grid.cfl
    if cfl == 1.0:
        new_z = shifted
    else:
        new_z = z - cfl * (z - shifted)
    return LineState(state.grid, new_z, state.k + 1)


def output(state: LineState) -> float:
    """Boundary trace at x = 1 (the last cell)."""
    return float(state.z[-1])


def run_schedule(state: LineState, u: ControlSchedule,
                 t_end: float) -> tuple[LineState, np.ndarray]:
    """Advance the line to ``t_end`` under ``u``; returns the output after each step.

    ``trace[j]`` is the output after step ``state.k + 1 + j``.  The schedule
    must cover the run up to the control horizon end T - 1/lam; beyond its
    last step the final value is held.
    """
    grid = state.grid
    k_end = grid.step_of(t_end)
    if k_end < state.k or k_end > grid.n_steps:
        raise ValidationError(f"run target t_end={t_end} outside [{state.t}, {grid.T}]")
    if abs(u.dt - grid.dt) > _TIME_TOL * grid.dt:
        raise ValidationError(f"schedule step {u.dt} does not match grid step {grid.dt}")
    control_end_step = grid.n_steps - grid.transit_steps
    if u.start_step > state.k:
        raise ValidationError(
            f"schedule starts at step {u.start_step}, after the state's step {state.k}")
    covered = u.start_step + u.n_steps
    if covered < min(k_end, control_end_step):
        raise ValidationError(
            f"schedule covers steps [{u.start_step}, {covered}) but the run needs "
            f"[{state.k}, {min(k_end, control_end_step)})")
    trace = np.empty(k_end - state.k)
    for j in range(k_end - state.k):
        state = step(state, u.value_for_step(state.k))
        trace[j] = state.z[-1]
    return state, trace


def delay_oracle(u: ControlSchedule, lam: float, s: float) -> float:
    """Exact boundary trace u(s - 1/lam) of the continuous solution (zero initial data)."""
    if lam <= 0.0:
        raise ValidationError(f"velocity must be positive, got {lam}")
    transit = 1.0 / lam
    if s < transit - _TIME_TOL:
        raise ValidationError(f"output at s={s} precedes the first arrival at {transit}")
    return u.value_at(s - transit)
