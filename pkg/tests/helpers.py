"""Independent oracles shared by the test modules.

Everything here deliberately avoids the package's closed forms: expectations
come from seeded Monte Carlo or scipy quadrature, quantiles from bisection.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad

from penflow import GaussianLaw


def mc_ofpen_estimate(law: GaussianLaw, y: float, alpha: float, n: int,
                      rng: np.random.Generator) -> tuple[float, float]:
    """Monte Carlo estimate of the penalized objective and its standard error.

    The tracking and penalty terms use independent ensembles so their
    standard errors add in quadrature.
    """
    sd = math.sqrt(law.variance)
    ya = law.mean + sd * rng.standard_normal(n)
    track = (ya - y) ** 2
    est_track = track.mean()
    se_track = track.std(ddof=1) / math.sqrt(n)

    yb = law.mean + sd * rng.standard_normal(n)
    exceed = yb > y
    n_exc = int(exceed.sum())
    if n_exc >= 2:
        shortfall_sq = ((yb - y) ** 2)[exceed]
        est_pen = shortfall_sq.mean()
        se_pen = shortfall_sq.std(ddof=1) / math.sqrt(n_exc)
    else:
        est_pen, se_pen = 0.0, 0.0
    est = est_track + alpha * est_pen
    se = math.sqrt(se_track ** 2 + (alpha * se_pen) ** 2)
    return float(est), float(se)


def quad_partial_sq_moment(mean: float, variance: float, y: float) -> float:
    """scipy quadrature of int_y^inf (z - y)^2 rho(z) dz for N(mean, variance).

    Standardizes and factors the density out so the upper tail keeps
    relative precision.
    """
    sd = math.sqrt(variance)
    a = (y - mean) / sd
    if a < 0.0:
        return variance * (1.0 + a * a) - quad_partial_sq_moment(-mean, variance, -y)
    dens = math.exp(-0.5 * a * a) / math.sqrt(2.0 * math.pi)
    body, _ = quad(lambda w: w * w * np.exp(-a * w - 0.5 * w * w), 0.0, np.inf,
                   epsabs=0.0, epsrel=1e-12)
    return variance * dens * body


def quad_conditional_mean(kappa: float, mu, t0: float, y_t0: float, s: float) -> float:
    """scipy quadrature of the conditional-mean convolution integral."""
    if s == t0:
        return y_t0
    body, _ = quad(lambda r: math.exp(-kappa * (s - r)) * mu(r), t0, s,
                   epsabs=1e-14, epsrel=1e-12, limit=200)
    return y_t0 * math.exp(-kappa * (s - t0)) + kappa * body


def quad_conditional_variance(kappa: float, sigma: float, t0: float, s: float) -> float:
    """scipy quadrature of the accumulated-noise integral."""
    if s == t0:
        return 0.0
    body, _ = quad(lambda r: sigma ** 2 * math.exp(-2.0 * kappa * (s - r)), t0, s,
                   epsabs=1e-14, epsrel=1e-12, limit=200)
    return body


def bisect_normal_quantile(p: float, iterations: int = 200) -> float:
    """Standard normal quantile by bisection.

    The upper half bisects the survival function so the oracle keeps full
    tail resolution there, mirroring how any accurate implementation must
    treat the two halves.
    """
    if p > 0.5:
        return -bisect_normal_quantile(1.0 - p, iterations)
    cdf = lambda x: 0.5 * math.erfc(-x / math.sqrt(2.0))
    lo, hi = -40.0, 40.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
