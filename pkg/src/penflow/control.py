"""Inflow control solvers for the penalized tracking objective.

The objective integrates the penalized loss over output times [1/lam, T]
while the control lives on [0, T - 1/lam].  On the discrete grid the
integral is a rectangle rule over the output nodes s_k = k*dt for
k = transit_steps .. n_steps - 1, each node weighted dt and read from the
line output after the k-th step.  With that convention every node is fed
by exactly one control step (the one starting at s_k - 1/lam), the
objective never looks at inflow past the control horizon end, and at unit
CFL the node-to-control map is an exact shift.

Two solvers cover the same problem:

* ``solve_pointwise`` exploits the exact delay map at unit CFL: the
  objective decouples across nodes, so each node is a bracketed scalar
  minimization and its optimum is written back to the feeding control step.
* ``solve_descent`` is an independent cross-check: projected limited-memory
  quasi-Newton descent on the discretized control vector, with the output
  trace assembled through the (affine) transport map.  It is also the only
  route on CFL < 1 grids, where the delay map is inexact.

``solve_cm1`` computes the open-loop control from the time-0 demand law.
``solve_cm2`` re-conditions the law on realized demand at prespecified
update times, solving one subproblem per update window and carrying the
line state across windows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .demand import DemandPath, GaussianLaw, OUParams, law
from .errors import SolverError, ValidationError
from .objective import ObjectiveTerm, PenaltyParams, of_pen, of_pen_grad
from .transport import ControlSchedule, GridSpec, LineState, init_line, run_schedule

_TIME_TOL = 1e-9
_CFL_TOL = 1e-12

#: Absolute x-tolerance of the per-node scalar minimization.
NODE_XATOL = 1e-10
#: Projected-gradient max-norm at which the descent solver stops.
DESCENT_GRAD_TOL = 1e-8
#: Iteration cap of the descent solver.
DESCENT_MAX_ITER = 500

LawProvider = Callable[[float], GaussianLaw]


@dataclass(frozen=True)
class Horizon:
    """Optimization horizon [0, T] with transit time 1/lam.

    ``control_end`` defaults to T - 1/lam; a shorter value is allowed so
    that held-inflow effects can be probed explicitly.
    """

    T: float
    lam: float
    control_end: float | None = None

    def __post_init__(self):
        if not (math.isfinite(self.T) and math.isfinite(self.lam)) or self.lam <= 0.0:
            raise ValidationError(f"need finite T and positive lam, got T={self.T}, lam={self.lam}")
        if self.T <= 1.0 / self.lam:
            raise ValidationError(
                f"horizon shorter than transit time (T={self.T} <= 1/lam={1.0 / self.lam})")
        default_end = self.T - 1.0 / self.lam
        end = default_end if self.control_end is None else float(self.control_end)
        if not 0.0 < end <= default_end + _TIME_TOL:
            raise ValidationError(
                f"control horizon end {end} must lie in (0, T - 1/lam = {default_end}]")
        object.__setattr__(self, "control_end", end)

    @property
    def transit(self) -> float:
        return 1.0 / self.lam


@dataclass(frozen=True)
class Bounds:
    """Box bounds on the inflow; ``u_max = None`` means unbounded above."""

    u_min: float = 0.0
    u_max: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.u_min):
            raise ValidationError(f"u_min must be finite, got {self.u_min}")
        if self.u_max is not None and self.u_max < self.u_min:
            raise ValidationError(f"u_min <= u_max violated ({self.u_min} > {self.u_max})")

    @property
    def upper(self) -> float:
        return math.inf if self.u_max is None else float(self.u_max)

    def clip(self, x):
        return np.clip(x, self.u_min, self.upper)


@dataclass(frozen=True)
class UpdateSchedule:
    """Prespecified forecast update times 0 = t_0 < t_1 < ... <= T - 1/lam."""

    times: tuple[float, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if not times:
            raise ValidationError("update schedule needs at least one time")
        if abs(times[0]) > _TIME_TOL:
            raise ValidationError(f"first update time must be 0, got {times[0]}")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValidationError("update times must be strictly increasing")
        object.__setattr__(self, "times", times)

    def step_indices(self, grid: GridSpec, horizon: Horizon) -> list[int]:
        """Grid step index of each update time; validates alignment and range."""
        end_step = grid.step_of(horizon.control_end)
        steps = []
        for t in self.times:
            k = grid.step_of(t)
            if k > end_step:
                raise ValidationError(
                    f"update time {t} lies beyond the control horizon end "
                    f"{horizon.control_end}")
            steps.append(k)
        return steps


def default_update_schedule(grid: GridSpec, horizon: Horizon,
                            n_updates: int = 5) -> UpdateSchedule:
    """Equal subdivision of [0, control_end] into ``n_updates`` update windows."""
    if n_updates < 1:
        raise ValidationError(f"need at least one update window, got {n_updates}")
    end_step = grid.step_of(horizon.control_end)
    if end_step % n_updates != 0:
        raise ValidationError(
            f"{n_updates} equal update windows do not fit {end_step} control steps")
    stride = end_step // n_updates
    return UpdateSchedule(tuple(i * stride * grid.dt for i in range(n_updates)))


@dataclass(frozen=True)
class SolveDiagnostics:
    iterations: int
    grad_norm: float
    converged: bool
    method: str


@dataclass(frozen=True)
class SolveResult:
    """Solver output: control schedule, per-node trace and laws, objective value."""

    schedule: ControlSchedule
    node_steps: np.ndarray
    node_times: np.ndarray
    output_trace: np.ndarray
    node_laws: tuple[GaussianLaw, ...]
    objective_value: float
    diagnostics: SolveDiagnostics

    def node_terms(self, pen: PenaltyParams) -> list[ObjectiveTerm]:
        """Objective components at every node (for reporting)."""
        return [of_pen(l, y, pen) for l, y in zip(self.node_laws, self.output_trace)]


def _check_grid_horizon(grid: GridSpec, horizon: Horizon) -> None:
    if abs(grid.T - horizon.T) > _TIME_TOL or abs(grid.lam - horizon.lam) > _TIME_TOL:
        raise ValidationError(
            f"grid (T={grid.T}, lam={grid.lam}) and horizon (T={horizon.T}, "
            f"lam={horizon.lam}) disagree")


def objective_node_steps(grid: GridSpec, horizon: Horizon) -> np.ndarray:
    """Step indices of the objective nodes: transit_steps .. n_steps - 1."""
    _check_grid_horizon(grid, horizon)
    return np.arange(grid.transit_steps, grid.n_steps)


def objective_functional(u: ControlSchedule, law_provider: LawProvider,
                         pen: PenaltyParams, horizon: Horizon, z_init: LineState,
                         node_steps: Sequence[int] | None = None) -> float:
    """Rectangle-rule objective of schedule ``u`` started from ``z_init``.

    Runs the transport line to T and sums dt * of_pen at each output node.
    ``node_steps`` restricts the quadrature window (used by the update
    subproblems); nodes must lie strictly after the initial state's step.
    """
    grid = z_init.grid
    _check_grid_horizon(grid, horizon)
    if node_steps is None:
        node_steps = objective_node_steps(grid, horizon)
    node_steps = np.asarray(node_steps, dtype=int)
    if node_steps.size and node_steps.min() <= z_init.k:
        raise ValidationError("objective nodes must lie after the initial state's step")
    _, trace = run_schedule(z_init, u, grid.T)
    total = 0.0
    for k in node_steps:
        y_k = trace[k - z_init.k - 1]
        total += of_pen(law_provider(k * grid.dt), y_k, pen).total
    return grid.dt * total


def _minimize_node(l: GaussianLaw, pen: PenaltyParams,
                   bounds: Bounds) -> tuple[float, int]:
    """Minimize of_pen(l, y) over y in the box; returns (y*, evaluations).

    The unconstrained optimum sits between the mean and the penalty's tail
    cutoff (above the cutoff the objective is pure tracking, hence
    increasing), so a bracket of eight conditional standard deviations
    always contains it.
    """
    lo_box, hi_box = bounds.u_min, bounds.upper
    m, v = l.mean, l.variance
    if v == 0.0:
        return float(np.clip(m, lo_box, hi_box)), 0
    sd = math.sqrt(v)
    lo = float(np.clip(m - sd, lo_box, hi_box))
    hi = float(np.clip(m + 8.0 * sd, lo_box, hi_box))
    if hi - lo <= NODE_XATOL:
        return 0.5 * (lo + hi), 0
    res = minimize_scalar(lambda y: of_pen(l, y, pen).total, bounds=(lo, hi),
                          method="bounded", options={"xatol": NODE_XATOL})
    if not res.success:
        raise SolverError(f"scalar node minimization failed: {res.message}")
    return float(res.x), int(res.nfev)


def _pointwise_window(law_provider: LawProvider, pen: PenaltyParams, bounds: Bounds,
                      grid: GridSpec, ctrl_start: int, ctrl_end: int,
                      ) -> tuple[np.ndarray, list[GaussianLaw], float, int]:
    """Decoupled node-by-node solve for control steps [ctrl_start, ctrl_end).

    Node k = j + transit_steps is fed by control step j alone, so the
    window objective splits into independent scalar problems.
    """
    transit = grid.transit_steps
    u = np.empty(ctrl_end - ctrl_start)
    laws: list[GaussianLaw] = []
    total = 0.0
    nfev = 0
    for j in range(ctrl_start, ctrl_end):
        k = j + transit
        l = law_provider(k * grid.dt)
        y_star, n = _minimize_node(l, pen, bounds)
        u[j - ctrl_start] = y_star
        laws.append(l)
        total += of_pen(l, y_star, pen).total
        nfev += n
    return u, laws, grid.dt * total, nfev


def _pointwise_grad_norm(u: np.ndarray, laws: Sequence[GaussianLaw],
                         pen: PenaltyParams, bounds: Bounds) -> float:
    pg = 0.0
    for y, l in zip(u, laws):
        g = of_pen_grad(l, y, pen)
        pg = max(pg, abs(y - float(bounds.clip(y - g))))
    return pg


def _require_unit_cfl(grid: GridSpec, who: str) -> None:
    if abs(grid.cfl - 1.0) > _CFL_TOL:
        raise SolverError(
            f"{who} requires the exact-shift grid (CFL = 1), got CFL = {grid.cfl}")


def solve_pointwise(law_provider: LawProvider, pen: PenaltyParams, horizon: Horizon,
                    bounds: Bounds, grid: GridSpec) -> SolveResult:
    """Full-horizon solve by per-node scalar minimization (unit CFL only)."""
    _check_grid_horizon(grid, horizon)
    _require_unit_cfl(grid, "the pointwise solver")
    n_ctrl = grid.step_of(horizon.control_end)
    if n_ctrl != grid.n_steps - grid.transit_steps:
        raise SolverError("the pointwise solver needs the full control horizon T - 1/lam")
    u, laws, total, nfev = _pointwise_window(law_provider, pen, bounds, grid, 0, n_ctrl)
    node_steps = np.arange(grid.transit_steps, grid.transit_steps + n_ctrl)
    diag = SolveDiagnostics(iterations=nfev,
                            grad_norm=_pointwise_grad_norm(u, laws, pen, bounds),
                            converged=True, method="pointwise")
    return SolveResult(ControlSchedule(0.0, grid.dt, u), node_steps,
                       node_steps * grid.dt, u.copy(), tuple(laws), total, diag)


def _transport_map(grid: GridSpec, z_init: LineState, ctrl_start: int,
                   n_ctrl: int, node_steps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Affine output map trace = M u + c at the given nodes.

    Columns are impulse responses of single control steps (with the
    end-of-schedule hold applied, so the last column carries the held
    tail); ``c`` is the contribution of the initial line content.
    """
    rows = node_steps - (z_init.k + 1)
    zero_state = LineState(grid, np.zeros(grid.n_cells), z_init.k)
    _, trace0 = run_schedule(z_init, ControlSchedule(ctrl_start * grid.dt, grid.dt,
                                                     np.zeros(n_ctrl)), grid.T)
    c = trace0[rows]
    m_mat = np.empty((node_steps.size, n_ctrl))
    for j in range(n_ctrl):
        e = np.zeros(n_ctrl)
        e[j] = 1.0
        _, tr = run_schedule(zero_state, ControlSchedule(ctrl_start * grid.dt, grid.dt, e),
                             grid.T)
        m_mat[:, j] = tr[rows]
    return m_mat, c


def _lbfgs_direction(g: np.ndarray, pairs: list[tuple[np.ndarray, np.ndarray, float]]
                     ) -> np.ndarray:
    """Two-loop recursion; falls back to steepest descent without pairs."""
    if not pairs:
        return -g
    q = g.copy()
    alphas = []
    for s, yv, rho in reversed(pairs):
        a = rho * float(s @ q)
        alphas.append(a)
        q -= a * yv
    s_last, y_last, _ = pairs[-1]
    q *= float(s_last @ y_last) / float(y_last @ y_last)
    for (s, yv, rho), a in zip(pairs, reversed(alphas)):
        b = rho * float(yv @ q)
        q += (a - b) * s
    return -q


def solve_descent(law_provider: LawProvider, pen: PenaltyParams, horizon: Horizon,
                  bounds: Bounds, grid: GridSpec, z_init: LineState,
                  u0: ControlSchedule,
                  node_steps: Sequence[int] | None = None) -> SolveResult:
    """Projected limited-memory quasi-Newton descent on the control vector.

    Gradients chain the analytic objective derivative through the affine
    transport map.  Stops at projected-gradient max-norm <= 1e-8 or after
    500 iterations; non-convergence is reported via the diagnostics flag,
    never silently.
    """
    _check_grid_horizon(grid, horizon)
    if abs(u0.dt - grid.dt) > _TIME_TOL * grid.dt:
        raise ValidationError("initial schedule is not aligned to the grid step")
    if u0.start_step != z_init.k:
        raise ValidationError("initial schedule must start at the initial state's step")
    n_ctrl = u0.n_steps
    if u0.start_step + n_ctrl > grid.step_of(horizon.control_end):
        raise ValidationError("initial schedule extends past the control horizon end")
    if node_steps is None:
        node_steps = objective_node_steps(grid, horizon)
    node_steps = np.asarray(node_steps, dtype=int)
    if node_steps.size == 0 or node_steps.min() <= z_init.k:
        raise ValidationError("descent needs a nonempty node window after the start step")

    laws = [law_provider(k * grid.dt) for k in node_steps]
    m_mat, c = _transport_map(grid, z_init, u0.start_step, n_ctrl, node_steps)
    dt = grid.dt

    def value(u: np.ndarray) -> float:
        y = m_mat @ u + c
        return dt * sum(of_pen(l, yk, pen).total for l, yk in zip(laws, y))

    def grad(u: np.ndarray) -> np.ndarray:
        y = m_mat @ u + c
        g_nodes = np.array([of_pen_grad(l, yk, pen) for l, yk in zip(laws, y)])
        return dt * (m_mat.T @ g_nodes)

    u = np.asarray(bounds.clip(u0.values), dtype=float)
    f_u = value(u)
    g = grad(u)
    pairs: list[tuple[np.ndarray, np.ndarray, float]] = []
    converged = False
    pg_norm = math.inf
    iterations = 0
    for iterations in range(1, DESCENT_MAX_ITER + 1):
        pg_norm = float(np.max(np.abs(u - bounds.clip(u - g))))
        if pg_norm <= DESCENT_GRAD_TOL:
            converged = True
            break
        d = _lbfgs_direction(g, pairs)
        if not np.all(np.isfinite(d)) or float(g @ d) >= 0.0:
            d = -g
        # Armijo backtracking along the projected arc (c = 1e-4, halving).
        step_len = 1.0
        trial = u
        f_trial = f_u
        accepted = False
        for _ in range(60):
            trial = np.asarray(bounds.clip(u + step_len * d), dtype=float)
            move = trial - u
            if not np.any(move):
                break
            f_trial = value(trial)
            if f_trial <= f_u + 1e-4 * min(0.0, float(g @ move)) and f_trial <= f_u:
                accepted = True
                break
            step_len *= 0.5
        if not accepted:
            break
        g_trial = grad(trial)
        s_vec = trial - u
        y_vec = g_trial - g
        sy = float(s_vec @ y_vec)
        if sy > 1e-12 * float(np.linalg.norm(s_vec)) * float(np.linalg.norm(y_vec)):
            pairs.append((s_vec, y_vec, 1.0 / sy))
            if len(pairs) > 10:
                pairs.pop(0)
        u, f_u, g = trial, f_trial, g_trial

    trace = m_mat @ u + c
    diag = SolveDiagnostics(iterations=iterations, grad_norm=pg_norm,
                            converged=converged, method="descent")
    return SolveResult(ControlSchedule(u0.t_start, dt, u), node_steps,
                       node_steps * dt, trace, tuple(laws), f_u, diag)


def solve_cm1(p: OUParams, pen: PenaltyParams, horizon: Horizon, grid: GridSpec,
              bounds: Bounds, solver: str = "pointwise",
              u0: ControlSchedule | None = None) -> SolveResult:
    """Open-loop control from the time-0 demand law over the full horizon."""
    provider: LawProvider = lambda s: law(p, 0.0, p.y0, s)
    if solver == "pointwise":
        return solve_pointwise(provider, pen, horizon, bounds, grid)
    if solver == "descent":
        if u0 is None:
            n_ctrl = grid.step_of(horizon.control_end)
            u0 = ControlSchedule(0.0, grid.dt,
                                 np.full(n_ctrl, float(bounds.clip(p.y0))))
        return solve_descent(provider, pen, horizon, bounds, grid, init_line(grid), u0)
    raise ValidationError(f"unknown solver {solver!r} (expected 'pointwise' or 'descent')")


def solve_cm2(p: OUParams, pen: PenaltyParams, horizon: Horizon, grid: GridSpec,
              bounds: Bounds, sched: UpdateSchedule, path: DemandPath) -> SolveResult:
    """Receding-horizon control re-conditioned on realized demand at update times.

    Window i controls [t_i, t_{i+1}) and pays for the output nodes
    [t_i + 1/lam, min(t_{i+1} + 1/lam, T)); the realized demand at t_i is
    read from ``path`` and the line state is carried across windows.
    """
    _check_grid_horizon(grid, horizon)
    _require_unit_cfl(grid, "the update-window solver")
    n_ctrl = grid.step_of(horizon.control_end)
    if n_ctrl != grid.n_steps - grid.transit_steps:
        raise SolverError("the update-window solver needs the full control horizon T - 1/lam")
    update_steps = sched.step_indices(grid, horizon)
    boundaries = update_steps + [n_ctrl]

    transit = grid.transit_steps
    dt = grid.dt
    full_u = np.empty(n_ctrl)
    node_laws: list[GaussianLaw] = []
    total = 0.0
    nfev = 0
    state = init_line(grid)
    trace_parts: list[np.ndarray] = []
    for k_lo, k_hi in zip(boundaries, boundaries[1:]):
        if k_hi <= k_lo:
            continue
        t_hat = k_lo * dt
        y_obs = path.value_at(t_hat)
        provider: LawProvider = lambda s, _t=t_hat, _y=y_obs: law(p, _t, _y, s)
        u_win, laws_win, obj_win, n = _pointwise_window(
            provider, pen, bounds, grid, k_lo, k_hi)
        full_u[k_lo:k_hi] = u_win
        node_laws.extend(laws_win)
        total += obj_win
        nfev += n
        state, tr = run_schedule(state, ControlSchedule(t_hat, dt, u_win), k_hi * dt)
        trace_parts.append(tr)

    # Run out the remaining steps (held inflow) to complete the output trace.
    if state.k < grid.n_steps:
        last = ControlSchedule((n_ctrl - 1) * dt, dt, full_u[-1:])
        state, tr = run_schedule(state, last, grid.T)
        trace_parts.append(tr)
    trace = np.concatenate(trace_parts)
    node_steps = np.arange(transit, transit + n_ctrl)
    schedule = ControlSchedule(0.0, dt, full_u)
    diag = SolveDiagnostics(iterations=nfev,
                            grad_norm=_pointwise_grad_norm(full_u, node_laws, pen, bounds),
                            converged=True, method="cm2-pointwise")
    return SolveResult(schedule, node_steps, node_steps * dt,
                       trace[node_steps - 1], tuple(node_laws), total, diag)


def objective_post_horizon_independence_check(
        u: ControlSchedule, tail_value: float, law_provider: LawProvider,
        pen: PenaltyParams, horizon: Horizon, grid: GridSpec,
        tol: float = 1e-13) -> bool:
    """True iff the objective ignores the inflow past the control horizon end.

    Compares the objective under the default hold against one where every
    step at or beyond ``control_end`` feeds ``tail_value`` instead.
    """
    _check_grid_horizon(grid, horizon)
    tail_start = grid.step_of(horizon.control_end)
    n_steps = grid.n_steps
    base = np.empty(n_steps)
    for k in range(n_steps):
        base[k] = u.value_for_step(k)
    alt = base.copy()
    alt[tail_start:] = tail_value
    f_base = objective_functional(ControlSchedule(0.0, grid.dt, base), law_provider,
                                  pen, horizon, init_line(grid))
    f_alt = objective_functional(ControlSchedule(0.0, grid.dt, alt), law_provider,
                                 pen, horizon, init_line(grid))
    return abs(f_base - f_alt) <= tol
