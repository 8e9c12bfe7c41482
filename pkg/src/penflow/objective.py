"""Tracking objective with an undersupply penalty, in closed form.

For Y ~ N(mean, variance) and output level y, with a = (y - mean) / sd:

    tracking(y)   = E[(Y - y)^2]            = (mean - y)^2 + variance
    partial(y)    = E[(Y - y)^2 1{Y > y}]   = variance * ((1 + a^2) * SF(a) - a * pdf(a))
    undersupply(y) = partial(y) / P(Y > y)   while P(Y > y) > eps_tail, else 0

    total(y) = tracking(y) + alpha * undersupply(y)

The zero branch of the conditional expectation is realized numerically by
the tail threshold ``eps_tail``: a Gaussian tail never vanishes exactly, but
below the threshold the penalty is physically negligible and the quotient
would only amplify noise.  Degenerate variance = 0 laws use the
deterministic limits.  All derivatives in y are analytic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .demand import GaussianLaw
from .errors import ValidationError
from .gaussian import pdf, sf

#: Tail probability below which the penalty's zero branch applies.
EPS_TAIL = 1e-12


@dataclass(frozen=True)
class PenaltyParams:
    """Penalty intensity; alpha = 0 recovers the plain tracking objective."""

    alpha: float

    def __post_init__(self):
        if not math.isfinite(self.alpha) or self.alpha < 0.0:
            raise ValidationError(f"alpha >= 0 violated (got alpha={self.alpha})")


@dataclass(frozen=True)
class ObjectiveTerm:
    """Objective split into its tracking and (unweighted) penalty parts."""

    tracking: float
    penalty: float
    total: float


def tracking_term(law: GaussianLaw, y: float) -> float:
    """Expected squared deviation E[(Y - y)^2]."""
    d = law.mean - y
    return d * d + law.variance


def partial_sq_moment(law: GaussianLaw, y: float) -> float:
    """Upper partial second moment E[(Y - y)^2 1{Y > y}].

    Standardizing Z = (Y - mean)/sd and a = (y - mean)/sd,

        E[(Y - y)^2 1{Y > y}] = v E[(Z - a)^2 1{Z > a}]
                              = v (E[Z^2 1] - 2 a E[Z 1] + a^2 E[1])
                              = v ((a pdf + SF) - 2 a pdf + a^2 SF)
                              = v ((1 + a^2) SF(a) - a pdf(a)).
    """
    v = law.variance
    if v == 0.0:
        d = law.mean - y
        return d * d if law.mean > y else 0.0
    a = (y - law.mean) / math.sqrt(v)
    return max(0.0, v * ((1.0 + a * a) * sf(a) - a * pdf(a)))


def undersupply_term(law: GaussianLaw, y: float, eps_tail: float = EPS_TAIL) -> float:
    """Conditional squared shortfall E[(Y - y)^2 | Y > y], zero branch below eps_tail."""
    if eps_tail <= 0.0:
        raise ValidationError(f"eps_tail must be positive, got {eps_tail}")
    v = law.variance
    if v == 0.0:
        d = law.mean - y
        return d * d if law.mean > y else 0.0
    a = (y - law.mean) / math.sqrt(v)
    tail = sf(a)
    if tail <= eps_tail:
        return 0.0
    return max(0.0, v * ((1.0 + a * a) * tail - a * pdf(a))) / tail


def of_pen(law: GaussianLaw, y: float, pen: PenaltyParams,
           eps_tail: float = EPS_TAIL) -> ObjectiveTerm:
    """Penalized objective with components reported separately."""
    tracking = tracking_term(law, y)
    penalty = undersupply_term(law, y, eps_tail)
    return ObjectiveTerm(tracking, penalty, tracking + pen.alpha * penalty)


def of_pen_grad(law: GaussianLaw, y: float, pen: PenaltyParams,
                eps_tail: float = EPS_TAIL) -> float:
    """d/dy of the penalized objective total.

    The penalty derivative follows from d(partial)/dy = 2 sd (a SF - pdf)
    and d SF(a(y))/dy = -pdf(a)/sd; the zero branch has zero gradient.
    """
    if eps_tail <= 0.0:
        raise ValidationError(f"eps_tail must be positive, got {eps_tail}")
    v = law.variance
    g = 2.0 * (y - law.mean)
    if v == 0.0:
        if law.mean > y:
            g += pen.alpha * 2.0 * (y - law.mean)
        return g
    sd = math.sqrt(v)
    a = (y - law.mean) / sd
    tail = sf(a)
    if tail <= eps_tail or pen.alpha == 0.0:
        return g
    dens = pdf(a)
    partial = max(0.0, v * ((1.0 + a * a) * tail - a * dens))
    d_partial = 2.0 * sd * (a * tail - dens)
    g += pen.alpha * (d_partial * tail + partial * dens / sd) / (tail * tail)
    return g
