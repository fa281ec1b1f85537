"""Gaussian bridge models for paired signal restoration.

Schedules, drifts, exponential-integrator samplers, weight-profile analysis,
numerical certification and a toy enhancement pipeline.
"""

from .composition import WeightProfile, compose_output, schedule_weights, weights_from_coeffs
from .dynamics import DriftDirection, marginal, ode_field, score, sde_drift
from .samplers import Method, TimeGrid, expint_coeffs, grid_for, make_grid, sample, step
from .schedules import Schedule, ScheduleKind, aux_gtilde_sq, eval_coefficients, make_schedule
from .special import expint_ei

__version__ = "0.1.0"

__all__ = [
    "Schedule",
    "ScheduleKind",
    "make_schedule",
    "eval_coefficients",
    "aux_gtilde_sq",
    "DriftDirection",
    "marginal",
    "score",
    "ode_field",
    "sde_drift",
    "Method",
    "TimeGrid",
    "make_grid",
    "grid_for",
    "expint_coeffs",
    "step",
    "sample",
    "WeightProfile",
    "schedule_weights",
    "weights_from_coeffs",
    "compose_output",
    "expint_ei",
]
