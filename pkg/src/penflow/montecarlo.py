"""Seeded path-ensemble evaluation of a control policy.

Simulates an ensemble of demand paths (one counter-based substream per path
index) and compares each path against the policy's output trace at every
objective node: how many paths lie above the output (undersupply count) and
how high above on average.  The open-loop policy is solved once and shared
by all paths; the receding-horizon policy is re-solved per path from the
path's own realized values at the update times, so the study measures
closed-loop performance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .control import (Bounds, Horizon, SolveResult, UpdateSchedule,
                      objective_node_steps, solve_cm1, solve_cm2)
from .demand import DemandPath, OUParams, confidence_band, conditional_mean, simulate_ensemble
from .errors import SolverError, ValidationError
from .objective import PenaltyParams
from .transport import GridSpec

POLICIES = ("cm1", "cm2")


@dataclass(frozen=True)
class MCConfig:
    """Study configuration: ensemble size, substream seed, policy.

    ``path_grid`` defaults to the transport grid's times; a custom grid must
    still contain every objective node and update time.
    """

    seed: int
    n_paths: int = 1000
    policy: str = "cm1"
    updates: UpdateSchedule | None = None
    quantile_levels: tuple[float, ...] = (0.05, 0.5, 0.95)
    path_grid: np.ndarray | None = None

    def __post_init__(self):
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise ValidationError(f"seed must be an integer, got {self.seed!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValidationError(f"seed must fit in an unsigned 64-bit integer, got {self.seed}")
        if self.n_paths < 1:
            raise ValidationError(f"n_paths >= 1 violated (got {self.n_paths})")
        policy = self.policy.lower()
        if policy not in POLICIES:
            raise ValidationError(f"policy must be one of {POLICIES}, got {self.policy!r}")
        object.__setattr__(self, "policy", policy)
        if policy == "cm2" and self.updates is None:
            raise ValidationError("the cm2 policy needs an update schedule")
        levels = tuple(float(q) for q in self.quantile_levels)
        if any(not 0.0 < q < 1.0 for q in levels):
            raise ValidationError(f"quantile levels must lie in (0, 1), got {levels}")
        object.__setattr__(self, "quantile_levels", levels)
        if self.path_grid is not None:
            pg = np.asarray(self.path_grid, dtype=float)
            pg.setflags(write=False)
            object.__setattr__(self, "path_grid", pg)


@dataclass(frozen=True)
class MCStudy:
    """Per-node undersupply statistics over a seeded path ensemble."""

    times: np.ndarray
    undersupply_count: np.ndarray
    avg_undersupply: np.ndarray
    quantile_levels: tuple[float, ...]
    band_quantiles: np.ndarray  # shape (len(levels), len(times))
    per_path_objective_mean: float
    n_paths: int
    seed: int
    policy: str
    alpha: float


@dataclass(frozen=True)
class ComparisonReport:
    """Per-node differences (a minus b) and the fraction of nodes with a <= b."""

    times: np.ndarray
    count_diff: np.ndarray
    avg_diff: np.ndarray
    fraction_count_le: float
    fraction_avg_le: float


@dataclass(frozen=True)
class BandTable:
    """Re-conditioned demand bands: at each time, the conditional law from
    the most recent update time's realized value."""

    times: np.ndarray
    center: np.ndarray
    levels: tuple[float, ...]
    lower: np.ndarray  # shape (len(levels), len(times))
    upper: np.ndarray


def _path_grid(grid: GridSpec, cfg: MCConfig) -> np.ndarray:
    if cfg.path_grid is None:
        return grid.times()
    pg = cfg.path_grid
    if pg[0] > 0.0 or pg[-1] < grid.T:
        raise ValidationError("path grid must cover [0, T]")
    steps = pg / grid.dt
    if np.max(np.abs(steps - np.round(steps))) > 1e-9:
        raise ValidationError("path grid must be aligned to the transport step")
    node_times = objective_node_steps(grid, Horizon(grid.T, grid.lam)) * grid.dt
    present = np.isin(np.round(node_times / grid.dt).astype(int),
                      np.round(steps).astype(int))
    if not np.all(present):
        raise ValidationError("path grid must contain every objective node")
    return pg


def run_study(p: OUParams, pen: PenaltyParams, horizon: Horizon, grid: GridSpec,
              cfg: MCConfig, bounds: Bounds = Bounds()) -> MCStudy:
    """Run the undersupply study for one policy on a seeded ensemble."""
    node_steps = objective_node_steps(grid, horizon)
    node_times = node_steps * grid.dt
    path_times = _path_grid(grid, cfg)
    paths = simulate_ensemble(p, path_times, p.y0, cfg.seed, cfg.n_paths)
    # Column index of each objective node within the path grid.
    cols = np.searchsorted(np.round(path_times / grid.dt).astype(int), node_steps)
    y_nodes = paths[:, cols]

    if cfg.policy == "cm1":
        res = solve_cm1(p, pen, horizon, grid, bounds)
        traces = np.broadcast_to(res.output_trace, y_nodes.shape)
    else:
        traces = np.empty_like(y_nodes)
        for i in range(cfg.n_paths):
            path = DemandPath(path_times, paths[i], (int(cfg.seed), i))
            try:
                traces[i] = solve_cm2(p, pen, horizon, grid, bounds,
                                      cfg.updates, path).output_trace
            except (SolverError, ValidationError) as exc:
                raise SolverError(f"study aborted at path {i}: {exc}") from exc

    diffs = y_nodes - traces
    exceed = diffs > 0.0
    counts = exceed.sum(axis=0)
    shortfall = np.where(exceed, diffs, 0.0).sum(axis=0)
    avg = np.divide(shortfall, counts, out=np.zeros_like(shortfall),
                    where=counts > 0)
    quantiles = np.quantile(y_nodes, cfg.quantile_levels, axis=0)
    per_path = grid.dt * (diffs ** 2 * (1.0 + pen.alpha * exceed)).sum(axis=1)
    return MCStudy(times=node_times, undersupply_count=counts.astype(int),
                   avg_undersupply=avg, quantile_levels=cfg.quantile_levels,
                   band_quantiles=quantiles,
                   per_path_objective_mean=float(per_path.mean()),
                   n_paths=cfg.n_paths, seed=int(cfg.seed), policy=cfg.policy,
                   alpha=pen.alpha)


def compare_policies(a: MCStudy, b: MCStudy) -> ComparisonReport:
    """Node-wise comparison of two studies sharing grid and seed lineage."""
    if a.times.shape != b.times.shape or np.max(np.abs(a.times - b.times)) > 1e-12:
        raise ValidationError("studies are on different node grids")
    if a.seed != b.seed or a.n_paths != b.n_paths:
        raise ValidationError("studies do not share the same seed lineage")
    count_diff = a.undersupply_count - b.undersupply_count
    avg_diff = a.avg_undersupply - b.avg_undersupply
    return ComparisonReport(
        times=a.times, count_diff=count_diff, avg_diff=avg_diff,
        fraction_count_le=float(np.mean(count_diff <= 0)),
        fraction_avg_le=float(np.mean(avg_diff <= 0.0)))


def band_data(p: OUParams, path: DemandPath, sched: UpdateSchedule,
              levels: tuple[float, ...] | list[float]) -> BandTable:
    """Piecewise re-conditioned confidence bands along one realized path.

    At each grid time the band comes from the conditional law anchored at
    the most recent update time's realized value; at an update time itself
    the band collapses onto the realization.
    """
    levels = tuple(float(q) for q in levels)
    if not levels or any(not 0.0 < q < 1.0 for q in levels):
        raise ValidationError(f"band levels must lie in (0, 1), got {levels}")
    update_times = np.asarray(sched.times)
    if path.times[0] > update_times[0] + 1e-9:
        raise ValidationError("path must cover the first update time")
    times = path.times
    center = np.empty(times.size)
    lower = np.empty((len(levels), times.size))
    upper = np.empty((len(levels), times.size))
    for j, t in enumerate(times):
        t_hat = float(update_times[update_times <= t + 1e-9][-1])
        y_hat = path.value_at(t_hat)
        center[j] = conditional_mean(p, t_hat, y_hat, float(t))
        for i, q in enumerate(levels):
            lower[i, j], upper[i, j] = confidence_band(p, t_hat, y_hat, float(t), q)
    return BandTable(times=times.copy(), center=center, levels=levels,
                     lower=lower, upper=upper)
