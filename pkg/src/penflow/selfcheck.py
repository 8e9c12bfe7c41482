"""Built-in oracle cross-checks, runnable from the command line.

Each check pits an implementation against an independent route: closed-form
moments against the package's adaptive quadrature, the upwind trace against
the exact delay map, analytic gradients against finite differences, and the
two solvers against each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import RunConfig
from .control import solve_cm1
from .demand import (GaussianLaw, conditional_mean, conditional_mean_quadrature,
                     conditional_variance)
from .objective import PenaltyParams, of_pen, of_pen_grad, partial_sq_moment
from .quadrature import adaptive_simpson
from .transport import ControlSchedule, delay_oracle, init_line, run_schedule


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def check_mean_quadrature(cfg: RunConfig) -> CheckResult:
    """Closed-form conditional mean against the quadrature route."""
    worst = 0.0
    for s in np.linspace(0.01, cfg.grid.T, 25):
        closed = conditional_mean(cfg.ou, 0.0, cfg.ou.y0, float(s))
        quad = conditional_mean_quadrature(cfg.ou, 0.0, cfg.ou.y0, float(s))
        worst = max(worst, _rel(closed, quad))
    return CheckResult("mean-vs-quadrature", worst <= 1e-8,
                       f"max relative deviation {worst:.3e} (tolerance 1e-8)")


def check_variance_quadrature(cfg: RunConfig) -> CheckResult:
    """Closed-form conditional variance against direct quadrature."""
    p = cfg.ou
    worst = 0.0
    for s in np.linspace(0.01, cfg.grid.T, 25):
        closed = conditional_variance(p, 0.0, float(s))
        quad = adaptive_simpson(
            lambda r: p.sigma ** 2 * math.exp(-2.0 * p.kappa * (s - r)), 0.0, float(s),
            tol=1e-12)
        worst = max(worst, _rel(closed, quad))
    return CheckResult("variance-vs-quadrature", worst <= 1e-8,
                       f"max relative deviation {worst:.3e} (tolerance 1e-8)")


def _std_partial_quad(a: float) -> float:
    """E[(Z - a)^2 1{Z > a}] by quadrature, with the density factored out.

    Substituting w = z - a gives pdf(a) * int_0^inf w^2 exp(-a w - w^2/2) dw,
    which keeps full relative precision deep in the upper tail.  Negative
    thresholds are mirrored through E[(Z - a)^2] = 1 + a^2 so the integrand
    stays bounded.
    """
    if a < 0.0:
        return (1.0 + a * a) - _std_partial_quad(-a)
    dens = math.exp(-0.5 * a * a) / math.sqrt(2.0 * math.pi)
    # Fixed panels so the coarse pass cannot overlook the mass near w = 0
    # once the exponential decay gets steep.
    cuts = (0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 60.0)
    body = sum(adaptive_simpson(lambda w: w * w * math.exp(-a * w - 0.5 * w * w),
                                lo, hi, tol=2e-14)
               for lo, hi in zip(cuts, cuts[1:]))
    return dens * body


def check_partial_moment(cfg: RunConfig) -> CheckResult:
    """Truncated second moment against quadrature of its defining integral."""
    worst = 0.0
    for a in np.linspace(-6.0, 6.0, 31):
        closed = partial_sq_moment(GaussianLaw(0.0, 1.0), float(a))
        worst = max(worst, _rel(closed, _std_partial_quad(float(a))))
    return CheckResult("partial-moment-vs-quadrature", worst <= 1e-8,
                       f"max relative deviation {worst:.3e} (tolerance 1e-8)")


def check_delay(cfg: RunConfig) -> CheckResult:
    """Upwind output trace against the exact delay map at unit CFL."""
    grid = cfg.grid
    if abs(grid.cfl - 1.0) > 1e-12:
        return CheckResult("upwind-vs-delay", False,
                           f"grid has CFL {grid.cfl}, exactness needs CFL = 1")
    rng = np.random.Generator(np.random.Philox(key=np.array([7, 1], dtype=np.uint64)))
    n_ctrl = grid.n_steps - grid.transit_steps
    worst = 0.0
    for _ in range(20):
        u = ControlSchedule(0.0, grid.dt, rng.uniform(-3.0, 5.0, n_ctrl))
        _, trace = run_schedule(init_line(grid), u, grid.T)
        for k in range(grid.transit_steps, grid.n_steps + 1):
            worst = max(worst, abs(trace[k - 1] - delay_oracle(u, grid.lam, k * grid.dt)))
    return CheckResult("upwind-vs-delay", worst <= 1e-13,
                       f"max absolute deviation {worst:.3e} (tolerance 1e-13)")


def check_gradient(cfg: RunConfig) -> CheckResult:
    """Analytic objective gradient against central finite differences."""
    rng = np.random.Generator(np.random.Philox(key=np.array([7, 2], dtype=np.uint64)))
    pen = PenaltyParams(max(cfg.pen.alpha, 1.0))
    worst = 0.0
    checked = 0
    while checked < 100:
        mean = rng.uniform(-3.0, 5.0)
        var = rng.uniform(0.05, 4.0)
        y = mean + rng.uniform(-4.0, 5.0) * math.sqrt(var)
        l = GaussianLaw(mean, var)
        g = of_pen_grad(l, y, pen)
        if abs(g) < 1e-2:  # relative comparison is ill-posed near stationary points
            continue
        h = 1e-6 * max(1.0, abs(y))
        fd = (of_pen(l, y + h, pen).total - of_pen(l, y - h, pen).total) / (2.0 * h)
        worst = max(worst, abs(fd - g) / abs(g))
        checked += 1
    return CheckResult("gradient-vs-finite-difference", worst <= 1e-6,
                       f"max relative deviation {worst:.3e} (tolerance 1e-6)")


def check_solvers(cfg: RunConfig) -> CheckResult:
    """Pointwise solve against the independent descent solve."""
    res_p = solve_cm1(cfg.ou, cfg.pen, cfg.horizon, cfg.grid, cfg.bounds)
    res_d = solve_cm1(cfg.ou, cfg.pen, cfg.horizon, cfg.grid, cfg.bounds,
                      solver="descent")
    du = float(np.max(np.abs(res_p.schedule.values - res_d.schedule.values)))
    dobj = _rel(res_p.objective_value, res_d.objective_value)
    ok = du <= 1e-6 and dobj <= 1e-8 and res_d.diagnostics.converged
    return CheckResult("pointwise-vs-descent", ok,
                       f"control max-norm {du:.3e} (tol 1e-6), objective rel "
                       f"{dobj:.3e} (tol 1e-8), descent converged "
                       f"{res_d.diagnostics.converged}")


ALL_CHECKS = (check_mean_quadrature, check_variance_quadrature, check_partial_moment,
              check_delay, check_gradient, check_solvers)


def run_selfchecks(cfg: RunConfig) -> list[CheckResult]:
    return [check(cfg) for check in ALL_CHECKS]
