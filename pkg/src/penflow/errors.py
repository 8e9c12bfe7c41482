"""Exception types shared across the package."""


class PenflowError(Exception):
    """Base class for all package errors."""


class ValidationError(PenflowError, ValueError):
    """A parameter, grid, schedule or configuration violates an invariant."""


class SolverError(PenflowError, RuntimeError):
    """An optimization or study run could not be completed."""


class QuadratureError(PenflowError, RuntimeError):
    """Adaptive quadrature exhausted its subdivision budget."""
