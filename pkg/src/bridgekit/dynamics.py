"""Marginals, score, ODE vector field and the forward/backward SDE drift family.

All fields are affine in ``(x, s, y)``; they are built as scalar coefficient
triples (:class:`DriftSpec`) and only then applied to vectors.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .schedules import PathCoefficients, Schedule, dirac_endpoints, eval_coefficients

__all__ = [
    "DriftDirection",
    "DriftSpec",
    "GaussianMarginal",
    "marginal",
    "score",
    "ode_spec",
    "sde_spec",
    "ode_field",
    "sde_drift",
    "DIRAC_GUARD",
]

# operations dividing by sigma_t reject t this close to a Dirac endpoint
DIRAC_GUARD = 1e-12


class DriftDirection(str, enum.Enum):
    FORWARD = "forward"
    BACKWARD = "backward"
    ODE = "ode"


@dataclass(frozen=True)
class GaussianMarginal:
    mean: np.ndarray
    sigma: float


@dataclass(frozen=True)
class DriftSpec:
    """drift = state_coeff * x + s_coeff * s + y_coeff * y, with diffusion ``g``."""

    state_coeff: float
    s_coeff: float
    y_coeff: float
    g: float
    direction: DriftDirection

    def apply(self, x, s, y) -> np.ndarray:
        return self.state_coeff * np.asarray(x) + self.s_coeff * np.asarray(s) + self.y_coeff * np.asarray(y)


def _pair(s, y) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(s)
    y = np.asarray(y)
    if s.shape != y.shape:
        raise ValueError(f"length mismatch: s has shape {s.shape}, y has shape {y.shape}")
    return s, y


def _interior(sched: Schedule, t: float) -> PathCoefficients:
    for end in dirac_endpoints(sched):
        if abs(t - end) < DIRAC_GUARD:
            raise ValueError(f"degenerate marginal: t={t} is at a Dirac endpoint of {sched.kind.value}")
    coeffs = eval_coefficients(sched, t)
    if not coeffs.sigma > 0.0:
        raise ValueError(f"degenerate marginal: sigma_t = 0 at t={t}")
    return coeffs


def marginal(sched: Schedule, s, y, t: float) -> GaussianMarginal:
    s, y = _pair(s, y)
    c = eval_coefficients(sched, t)
    return GaussianMarginal(mean=c.a * s + c.b * y, sigma=c.sigma)


def score(sched: Schedule, x, s, y, t: float) -> np.ndarray:
    """Score of the conditional Gaussian path, ``-(x - mu_t) / sigma_t^2``."""
    s, y = _pair(s, y)
    c = _interior(sched, t)
    mean = c.a * s + c.b * y
    return -(np.asarray(x) - mean) / c.variance


def ode_spec(sched: Schedule, t: float) -> DriftSpec:
    c = _interior(sched, t)
    rate = c.dsigma / c.sigma
    return DriftSpec(
        state_coeff=rate,
        s_coeff=c.da - c.a * rate,
        y_coeff=c.db - c.b * rate,
        g=0.0,
        direction=DriftDirection.ODE,
    )


def sde_spec(sched: Schedule, t: float, g: float, direction: DriftDirection | str) -> DriftSpec:
    """Coefficient triple of the forward (``kappa+``) or backward (``kappa-``) SDE drift."""
    direction = DriftDirection(direction)
    if g < 0.0:
        raise ValueError("diffusion coefficient g must be non-negative")
    if direction is DriftDirection.ODE:
        return ode_spec(sched, t)
    c = _interior(sched, t)
    correction = g * g / (2.0 * c.variance)
    kappa = c.dsigma / c.sigma
    kappa = kappa - correction if direction is DriftDirection.FORWARD else kappa + correction
    return DriftSpec(
        state_coeff=kappa,
        s_coeff=c.da - c.a * kappa,
        y_coeff=c.db - c.b * kappa,
        g=float(g),
        direction=direction,
    )


def ode_field(sched: Schedule, x, s, y, t: float) -> np.ndarray:
    s, y = _pair(s, y)
    return ode_spec(sched, t).apply(x, s, y)


def sde_drift(sched: Schedule, x, s, y, t: float, g: float, direction: DriftDirection | str) -> np.ndarray:
    s, y = _pair(s, y)
    return sde_spec(sched, t, g, direction).apply(x, s, y)
