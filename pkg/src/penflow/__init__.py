"""Optimal inflow control of a transport line under uncertain, mean-reverting demand.

The demand is an Ornstein-Uhlenbeck process around a time-dependent mean
level; goods travel the line with constant velocity, so the inflow acts on
the output with a fixed transit delay.  The objective tracks the demand in
expected squared deviation and adds a penalty on the conditional squared
shortfall given undersupply.  Controls are computed open-loop from the
initial demand law (cm1) or receding-horizon with forecast updates at
prespecified times (cm2); a seeded Monte Carlo harness counts and sizes the
undersupply events per output node.
"""

from .control import (Bounds, Horizon, SolveDiagnostics, SolveResult, UpdateSchedule,
                      default_update_schedule, objective_functional,
                      objective_node_steps, objective_post_horizon_independence_check,
                      solve_cm1, solve_cm2, solve_descent, solve_pointwise)
from .demand import (DemandPath, GaussianLaw, MeanFunction, OUParams, Sinusoid,
                     conditional_mean, conditional_mean_quadrature,
                     conditional_variance, confidence_band, law, path_generator,
                     sample_transition, simulate_ensemble, simulate_path)
from .errors import PenflowError, QuadratureError, SolverError, ValidationError
from .montecarlo import (BandTable, ComparisonReport, MCConfig, MCStudy, band_data,
                         compare_policies, run_study)
from .objective import (EPS_TAIL, ObjectiveTerm, PenaltyParams, of_pen, of_pen_grad,
                        partial_sq_moment, tracking_term, undersupply_term)
from .transport import (ControlSchedule, GridSpec, LineState, delay_oracle, init_line,
                        output, run_schedule, step)

__version__ = "0.1.0"

__all__ = [
    "Bounds", "Horizon", "SolveDiagnostics", "SolveResult", "UpdateSchedule",
    "default_update_schedule", "objective_functional", "objective_node_steps",
    "objective_post_horizon_independence_check", "solve_cm1", "solve_cm2",
    "solve_descent", "solve_pointwise",
    "DemandPath", "GaussianLaw", "MeanFunction", "OUParams", "Sinusoid",
    "conditional_mean", "conditional_mean_quadrature", "conditional_variance",
    "confidence_band", "law", "path_generator", "sample_transition",
    "simulate_ensemble", "simulate_path",
    "PenflowError", "QuadratureError", "SolverError", "ValidationError",
    "BandTable", "ComparisonReport", "MCConfig", "MCStudy", "band_data",
    "compare_policies", "run_study",
    "EPS_TAIL", "ObjectiveTerm", "PenaltyParams", "of_pen", "of_pen_grad",
    "partial_sq_moment", "tracking_term", "undersupply_term",
    "ControlSchedule", "GridSpec", "LineState", "delay_oracle", "init_line",
    "output", "run_schedule", "step",
    "__version__",
]
