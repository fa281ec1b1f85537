"""Decomposition of the final ODE sample into weighted model predictions.

The final state of an exponential-integrator run is
``sum_n w_n * s_hat_n + w_y * y``.  Indexing is reverse-time: ``w[0]`` (``w_1``
in one-based notation) weights the **last** model call, the one made at the
grid point next to the stopping time; ``w[-1]`` weights the first call, made
at the noisy end.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .samplers import SampleTrace, StepCoefficients, TimeGrid, Traversal, expint_coeffs
from .schedules import Schedule, is_sb_family, sb_terms

__all__ = [
    "WeightProfile",
    "weights_from_coeffs",
    "weights_closed_form_sb",
    "schedule_weights",
    "step_coefficients",
    "compose_output",
    "profile_to_csv",
]


@dataclass(frozen=True)
class WeightProfile:
    w: tuple[float, ...]
    w_y: float
    times: tuple[float, ...] | None = None

    @property
    def n_steps(self) -> int:
        return len(self.w)

    @property
    def total(self) -> float:
        return math.fsum(self.w) + self.w_y


def _call_times(grid: TimeGrid) -> tuple[float, ...]:
    """Time of the model call each weight belongs to, in weight order."""
    ordered = grid.ordered()
    n = grid.n_steps
    return tuple(ordered[n - i] for i in range(1, n + 1))


def step_coefficients(sched: Schedule, grid: TimeGrid) -> list[StepCoefficients]:
    """Exponential-integrator coefficients for every step, in the order taken."""
    times = grid.ordered()
    return [expint_coeffs(sched, t, r) for r, t in zip(times, times[1:])]


def weights_from_coeffs(coeffs: Sequence[StepCoefficients], times: Sequence[float] | None = None) -> WeightProfile:
    """Unroll the affine recursion into per-call weights.

    ``coeffs`` runs from the first step taken (leaving the noisy end) to the
    last one.  The start state is taken to be ``y``.
    """
    if len(coeffs) == 0:
        raise ValueError("need at least one step")
    # walk backwards from the final state: the last step is applied last, so
    # its eta multiplies the last call directly, earlier ones are damped by xi
    w = []
    w_y = 0.0
    carry = 1.0
    for c in reversed(coeffs):
        w.append(carry * c.eta)
        w_y += carry * c.zeta
        carry *= c.xi
    w_y += carry  # the start state x = y
    return WeightProfile(tuple(w), w_y, None if times is None else tuple(times))


def weights_closed_form_sb(
    grid: TimeGrid,
    alpha: Callable[[float], float],
    rho_sq: Callable[[float], float],
    rho_bar_sq: Callable[[float], float] | None = None,
) -> WeightProfile:
    """Closed-form weights of a Schroedinger-bridge path sampled on ``grid``.

    ``rho_sq`` is ``rho_t^2``; the bridge is taken to be pinned at the last
    grid point, so ``rho_bar_t^2 = rho_N^2 - rho_t^2`` unless given.
    """
    if grid.traversal is not Traversal.REVERSE:
        raise ValueError("closed-form SB weights assume reverse-time sampling")
    pts = grid.points
    n = grid.n_steps
    rho_n_sq = rho_sq(pts[-1])
    if rho_bar_sq is None:
        rho_bar_sq = lambda t: rho_n_sq - rho_sq(t)  # noqa: E731
    rs = [rho_sq(t) for t in pts]
    if rs[0] <= 0.0:
        raise ValueError("rho_0 = 0: the grid must stop strictly after the clean endpoint")
    rbar = [max(rho_bar_sq(t), 0.0) for t in pts]
    rbar[-1] = 0.0
    ratio = [math.sqrt(rb / r) for rb, r in zip(rbar, rs)]
    alpha_0, alpha_n = alpha(pts[0]), alpha(pts[-1])
    scale = alpha_0 * math.sqrt(rs[0] * rbar[0]) / rho_n_sq
    w = tuple(scale * (ratio[i - 1] - ratio[i]) for i in range(1, n + 1))
    w_y = alpha_0 * rs[0] / (alpha_n * rho_n_sq)
    return WeightProfile(w, w_y, _call_times(grid))


def schedule_weights(sched: Schedule, grid: TimeGrid, method: str = "auto") -> WeightProfile:
    """Weights for ``sched`` on ``grid``; closed form for SB paths ending at t=1."""
    if method == "auto":
        method = "closed" if is_sb_family(sched) and grid.points[-1] == 1.0 else "recursion"
    if method == "closed":
        if not is_sb_family(sched):
            raise ValueError(f"no closed-form weights for {sched.kind.value}")
        return weights_closed_form_sb(
            grid,
            alpha=lambda t: sb_terms(sched, t).alpha,
            rho_sq=lambda t: sb_terms(sched, t).rho_sq,
            rho_bar_sq=(lambda t: sb_terms(sched, t).rho_bar_sq) if grid.points[-1] == 1.0 else None,
        )
    if method == "recursion":
        return weights_from_coeffs(step_coefficients(sched, grid), _call_times(grid))
    raise ValueError(f"unknown weight method {method!r}")


def compose_output(profile: WeightProfile, predictions: Sequence, y, order: str = "weight") -> np.ndarray:
    """``sum_n w_n * prediction_n + w_y * y``.

    With ``order="call"`` the predictions are in the order the sampler made
    them (``SampleTrace.predictions``) and are reversed to weight order.
    """
    preds = list(predictions)
    if order == "call":
        preds = preds[::-1]
    elif order != "weight":
        raise ValueError(f"unknown prediction order {order!r}")
    if len(preds) != profile.n_steps:
        raise ValueError(f"expected {profile.n_steps} predictions, got {len(preds)}")
    y = np.asarray(y)
    out = profile.w_y * y
    for w, p in zip(profile.w, preds):
        p = np.asarray(p)
        if p.shape != y.shape:
            raise ValueError(f"prediction shape {p.shape} does not match y {y.shape}")
        out = out + w * p
    return out


def recompose_trace(trace: SampleTrace, y) -> np.ndarray:
    """Rebuild an exponential-integrator trace's final state from its predictions."""
    profile = weights_from_coeffs(trace.coefficients)
    return compose_output(profile, trace.predictions, y, order="call")


def profile_to_csv(profile: WeightProfile) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step_index", "t", "weight"])
    times = profile.times or (None,) * profile.n_steps
    for i, (w, t) in enumerate(zip(profile.w, times), start=1):
        writer.writerow([i, "" if t is None else repr(float(t)), repr(float(w))])
    writer.writerow(["y", "", repr(float(profile.w_y))])
    return buf.getvalue()
