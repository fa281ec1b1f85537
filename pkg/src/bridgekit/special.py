"""Exponential integral Ei on the negative half-line."""

from __future__ import annotations

import math

EULER_GAMMA = 0.57721566490153286061
_SERIES_LIMIT = 4.0
_EPS = 1e-17
_MAX_ITER = 500


def expint_ei(x: float) -> float:
    """Exponential integral ``Ei(x)`` for ``x < 0``.

    Uses the convergent power series for ``|x| <= 4`` and a Lentz-evaluated
    continued fraction of ``E1(-x)`` beyond that.
    """
    x = float(x)
    if x == 0.0:
        raise ValueError("singular argument: Ei has a logarithmic singularity at 0")
    if not x < 0.0 or math.isnan(x):
        raise ValueError(f"Ei is only supported for negative arguments, got {x}")
    if -x <= _SERIES_LIMIT:
        return _ei_series(x)
    return -_e1_continued_fraction(-x)


def _ei_series(x: float) -> float:
    total = 0.0
    term = 1.0
    for n in range(1, _MAX_ITER):
        term *= x / n
        contrib = term / n
        total += contrib
        if abs(contrib) < _EPS * abs(total):
            break
    return EULER_GAMMA + math.log(-x) + total


def _e1_continued_fraction(z: float) -> float:
    tiny = 1e-300
    b = z + 1.0
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_ITER):
        an = -float(i * i)
        b += 2.0
        d = 1.0 / (an * d + b)
        c = b + an / c
        delta = c * d
        h *= delta
        if abs(delta - 1.0) < _EPS:
            return h * math.exp(-z)
    raise ArithmeticError(f"E1 continued fraction did not converge for z={z}")
