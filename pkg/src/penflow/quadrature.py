"""Adaptive Simpson quadrature with an explicit subdivision budget."""

from __future__ import annotations

from typing import Callable

from .errors import QuadratureError


def _simpson(f: Callable[[float], float], a: float, fa: float,
             b: float, fb: float) -> tuple[float, float, float]:
    m = 0.5 * (a + b)
    fm = f(m)
    return m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(f: Callable[[float], float], a: float, b: float,
                     tol: float = 1e-10, max_intervals: int = 1_000_000) -> float:
    """Integrate ``f`` over ``[a, b]`` to absolute tolerance ``tol``.

    Classic adaptive Simpson with the |S_fine - S_coarse|/15 error
    estimate and Richardson correction on accepted panels.  Raises
    QuadratureError once more than ``max_intervals`` panels were needed.
    """
    if tol <= 0.0:
        raise ValueError(f"tolerance must be positive, got {tol}")
    if a == b:
        return 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, tol=tol, max_intervals=max_intervals)

    fa, fb = f(a), f(b)
    m, fm, whole = _simpson(f, a, fa, b, fb)
    stack = [(a, fa, b, fb, m, fm, whole, tol)]
    total = 0.0
    used = 1
    while stack:
        a_, fa_, b_, fb_, m_, fm_, whole_, tol_ = stack.pop()
        lm, flm, left = _simpson(f, a_, fa_, m_, fm_)
        rm, frm, right = _simpson(f, m_, fm_, b_, fb_)
        used += 2
        if used > max_intervals:
            raise QuadratureError(
                f"adaptive quadrature exceeded {max_intervals} subdivisions on [{a}, {b}]")
        delta = left + right - whole_
        if abs(delta) <= 15.0 * tol_:
            total += left + right + delta / 15.0
        else:
            half = 0.5 * tol_
            stack.append((a_, fa_, m_, fm_, lm, flm, left, half))
            stack.append((m_, fm_, b_, fb_, rm, frm, right, half))
    return total
