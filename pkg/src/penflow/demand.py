"""Mean-reverting (Ornstein-Uhlenbeck) demand model.

The demand follows dY_t = kappa * (mu(t) - Y_t) dt + sigma * dW_t around a
time-dependent mean level mu(t).  Conditionally on an observation Y_t0 the
process is Gaussian, with moments

    mean(s)     = Y_t0 * exp(-kappa (s - t0)) + kappa * int_t0^s exp(-kappa (s-r)) mu(r) dr
    variance(s) = sigma^2 * (1 - exp(-2 kappa (s - t0))) / (2 kappa)

Everything downstream (objective evaluation, control synthesis, Monte Carlo
studies) only ever touches this conditional law, so sampling uses the exact
Gaussian transition rather than an Euler scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .gaussian import inv_cdf
from .quadrature import adaptive_simpson

_TWO_PI = 2.0 * math.pi
_TIME_TOL = 1e-9

#: Absolute tolerance of the quadrature fallback for tabulated mean levels.
QUAD_TOL = 1e-10


def _finite(x: float, name: str) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise ValidationError(f"{name} must be finite, got {x}")
    return x


@dataclass(frozen=True)
class Sinusoid:
    """One sinusoidal component of the mean demand level.

    ``frequency`` is in cycles per unit time, ``phase`` in radians.
    """

    amplitude: float
    frequency: float
    phase: float = 0.0

    def __post_init__(self):
        for name in ("amplitude", "frequency", "phase"):
            _finite(getattr(self, name), f"sinusoid {name}")


@dataclass(frozen=True)
class MeanFunction:
    """Mean demand level mu(t): constant plus sinusoids, or tabulated knots.

    The analytic family (offset + finite sum of sinusoids) admits a closed
    form for the conditional-mean convolution and is defined for all t.
    Alternatively ``knots`` gives (time, value) pairs joined by linear
    interpolation; that form is integrated by adaptive quadrature and is
    only defined on the knot span.  The two forms are mutually exclusive.
    """

    offset: float = 0.0
    sinusoids: tuple[Sinusoid, ...] = ()
    knots: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        _finite(self.offset, "mean offset")
        object.__setattr__(self, "sinusoids", tuple(self.sinusoids))
        if self.knots is not None:
            if self.offset != 0.0 or self.sinusoids:
                raise ValidationError(
                    "a tabulated mean level replaces the analytic form; "
                    "offset and sinusoids must be left at their defaults")
            knots = tuple((float(t), float(v)) for t, v in self.knots)
            if len(knots) < 2:
                raise ValidationError("tabulated mean level needs at least two knots")
            times = [t for t, _ in knots]
            if any(not math.isfinite(t) for t in times) or \
               any(not math.isfinite(v) for _, v in knots):
                raise ValidationError("tabulated mean knots must be finite")
            if any(b <= a for a, b in zip(times, times[1:])):
                raise ValidationError("tabulated mean knot times must be strictly increasing")
            object.__setattr__(self, "knots", knots)

    @property
    def domain(self) -> tuple[float, float] | None:
        """Closed interval on which mu is defined, or None if unrestricted."""
        if self.knots is None:
            return None
        return self.knots[0][0], self.knots[-1][0]

    def __call__(self, t: float) -> float:
        if self.knots is not None:
            lo, hi = self.domain
            if t < lo - _TIME_TOL or t > hi + _TIME_TOL:
                raise ValidationError(
                    f"mean level evaluated at t={t} outside its domain [{lo}, {hi}]")
            times = [k[0] for k in self.knots]
            values = [k[1] for k in self.knots]
            return float(np.interp(t, times, values))
        out = self.offset
        for s in self.sinusoids:
            out += s.amplitude * math.sin(_TWO_PI * s.frequency * t + s.phase)
        return out


@dataclass(frozen=True)
class OUParams:
    """Demand process parameters: reversion speed, volatility, start, mean level."""

    kappa: float
    sigma: float
    y0: float
    mu: MeanFunction

    def __post_init__(self):
        _finite(self.kappa, "kappa")
        _finite(self.sigma, "sigma")
        _finite(self.y0, "y0")
        if self.kappa <= 0.0:
            raise ValidationError(f"kappa > 0 violated (got kappa={self.kappa})")
        if self.sigma <= 0.0:
            raise ValidationError(f"sigma > 0 violated (got sigma={self.sigma})")


@dataclass(frozen=True)
class GaussianLaw:
    """Conditional law of the demand at some future time: N(mean, variance)."""

    mean: float
    variance: float

    def __post_init__(self):
        _finite(self.mean, "mean")
        _finite(self.variance, "variance")
        if self.variance < 0.0:
            raise ValidationError(f"variance must be nonnegative, got {self.variance}")


@dataclass(frozen=True)
class DemandPath:
    """One sampled demand trajectory on a strictly increasing time grid."""

    times: np.ndarray
    values: np.ndarray
    seed: tuple[int, int]

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or values.shape != times.shape:
            raise ValidationError("path times and values must be 1-d arrays of equal length")
        if times.size == 0:
            raise ValidationError("path must contain at least one point")
        if np.any(np.diff(times) <= 0.0):
            raise ValidationError("path times must be strictly increasing")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def value_at(self, t: float) -> float:
        """Sample value at grid time ``t``; rejects off-grid times."""
        idx = int(np.searchsorted(self.times, t - _TIME_TOL))
        if idx >= self.times.size or abs(self.times[idx] - t) > _TIME_TOL:
            raise ValidationError(f"path has no sample at t={t}")
        return float(self.values[idx])


def _check_window(p: OUParams, t0: float, s: float) -> None:
    if not (math.isfinite(t0) and math.isfinite(s)):
        raise ValidationError(f"times must be finite, got t0={t0}, s={s}")
    if t0 < 0.0:
        raise ValidationError(f"conditioning time must be nonnegative, got t0={t0}")
    if s < t0:
        raise ValidationError(f"target time s={s} precedes conditioning time t0={t0}")
    dom = p.mu.domain
    if dom is not None:
        lo, hi = dom
        if t0 < lo - _TIME_TOL or s > hi + _TIME_TOL:
            raise ValidationError(
                f"window [{t0}, {s}] leaves the mean level's domain [{lo}, {hi}]")


def _mean_closed(p: OUParams, t0: float, y_t0: float, s: float) -> float:
    kappa = p.kappa
    tau = s - t0
    decay = math.exp(-kappa * tau)
    out = y_t0 * decay - p.mu.offset * math.expm1(-kappa * tau)
    for comp in p.mu.sinusoids:
        w = _TWO_PI * comp.frequency
        g_s = kappa * math.sin(w * s + comp.phase) - w * math.cos(w * s + comp.phase)
        g_t0 = kappa * math.sin(w * t0 + comp.phase) - w * math.cos(w * t0 + comp.phase)
        out += kappa * comp.amplitude * (g_s - decay * g_t0) / (kappa * kappa + w * w)
    return out


def conditional_mean_quadrature(p: OUParams, t0: float, y_t0: float, s: float,
                                tol: float = QUAD_TOL) -> float:
    """Conditional mean via adaptive quadrature of the convolution integral.

    Works for any mean level; this is the only route for tabulated knots.
    The integration window is split at interior knots so each panel is smooth.
    """
    _check_window(p, t0, s)
    if s == t0:
        return float(y_t0)
    kappa = p.kappa
    cuts = [t0, s]
    if p.mu.knots is not None:
        cuts[1:1] = [t for t, _ in p.mu.knots if t0 < t < s]
    n_seg = len(cuts) - 1
    integral = 0.0
    for lo, hi in zip(cuts, cuts[1:]):
        integral += adaptive_simpson(
            lambda r: math.exp(-kappa * (s - r)) * p.mu(r), lo, hi, tol=tol / n_seg)
    return y_t0 * math.exp(-kappa * (s - t0)) + kappa * integral


def conditional_mean(p: OUParams, t0: float, y_t0: float, s: float) -> float:
    """E[Y_s | Y_t0 = y_t0].

    Closed form for the analytic mean-level family; quadrature fallback
    for tabulated knots.
    """
    _check_window(p, t0, s)
    if p.mu.knots is not None:
        return conditional_mean_quadrature(p, t0, y_t0, s)
    return _mean_closed(p, t0, float(y_t0), s)


def conditional_variance(p: OUParams, t0: float, s: float) -> float:
    """Var[Y_s | Y_t0], independent of the conditioning value."""
    _check_window(p, t0, s)
    return -p.sigma * p.sigma * math.expm1(-2.0 * p.kappa * (s - t0)) / (2.0 * p.kappa)


def law(p: OUParams, t0: float, y_t0: float, s: float) -> GaussianLaw:
    """Conditional law of Y_s given Y_t0 = y_t0."""
    return GaussianLaw(conditional_mean(p, t0, y_t0, s),
                       conditional_variance(p, t0, s))


def sample_transition(p: OUParams, t: float, y_t: float, dt: float,
                      rng: np.random.Generator) -> float:
    """Draw Y_{t+dt} from its exact conditional law given Y_t = y_t."""
    if not dt > 0.0:
        raise ValidationError(f"transition step must be positive, got dt={dt}")
    l = law(p, t, y_t, t + dt)
    return l.mean + math.sqrt(l.variance) * float(rng.standard_normal())


def path_generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator for one path substream.

    Distinct ``(seed, stream)`` pairs key independent Philox streams, so an
    ensemble is reproducible regardless of the order paths are simulated in.
    """
    for name, v in (("seed", seed), ("stream", stream)):
        if not isinstance(v, (int, np.integer)) or isinstance(v, bool):
            raise ValidationError(f"{name} must be an integer, got {v!r}")
        if not 0 <= int(v) < 2 ** 64:
            raise ValidationError(f"{name} must fit in an unsigned 64-bit integer, got {v}")
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _transition_coefficients(p: OUParams, times: np.ndarray):
    """Per-step (decay, drift, noise std) of the exact Gaussian transition."""
    n = times.size - 1
    decay = np.empty(n)
    drift = np.empty(n)
    std = np.empty(n)
    for k in range(n):
        t_a, t_b = float(times[k]), float(times[k + 1])
        decay[k] = math.exp(-p.kappa * (t_b - t_a))
        drift[k] = conditional_mean(p, t_a, 0.0, t_b)
        std[k] = math.sqrt(conditional_variance(p, t_a, t_b))
    return decay, drift, std


def simulate_ensemble(p: OUParams, times: Sequence[float] | np.ndarray, y_start: float,
                      seed: int, n_paths: int, first_stream: int = 0) -> np.ndarray:
    """Simulate ``n_paths`` exact-transition paths; returns (n_paths, len(times)).

    Path ``i`` draws from the substream ``first_stream + i``; rows are
    bit-identical to one-path runs with the matching stream index.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValidationError("time grid must be a nonempty 1-d array")
    if np.any(np.diff(times) <= 0.0):
        raise ValidationError("time grid must be strictly increasing")
    if n_paths < 1:
        raise ValidationError(f"need at least one path, got n_paths={n_paths}")
    _check_window(p, float(times[0]), float(times[-1]))

    n_steps = times.size - 1
    out = np.empty((n_paths, times.size))
    out[:, 0] = y_start
    if n_steps == 0:
        return out
    decay, drift, std = _transition_coefficients(p, times)
    noise = np.empty((n_paths, n_steps))
    for i in range(n_paths):
        noise[i] = path_generator(seed, first_stream + i).standard_normal(n_steps)
    for k in range(n_steps):
        out[:, k + 1] = decay[k] * out[:, k] + drift[k] + std[k] * noise[:, k]
    return out


def simulate_path(p: OUParams, times: Sequence[float] | np.ndarray, y_start: float,
                  seed: int, stream: int = 0) -> DemandPath:
    """Simulate one exact-transition path, deterministic in (seed, stream)."""
    values = simulate_ensemble(p, times, y_start, seed, 1, first_stream=stream)[0]
    return DemandPath(np.asarray(times, dtype=float), values, (int(seed), int(stream)))


def confidence_band(p: OUParams, t0: float, y_t0: float, s: float,
                    level: float) -> tuple[float, float]:
    """Central Gaussian band of the conditional law at coverage ``level``."""
    if not 0.0 < level < 1.0:
        raise ValidationError(f"band level must lie in (0, 1), got {level}")
    l = law(p, t0, y_t0, s)
    half = inv_cdf(0.5 * (1.0 + level)) * math.sqrt(l.variance)
    return l.mean - half, l.mean + half
