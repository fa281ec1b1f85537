"""Time grids, single-step integrators and the full sampling loop."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import DriftDirection, DriftSpec, ode_spec, sde_spec
from .schedules import (
    Direction,
    Schedule,
    dirac_endpoints,
    eval_coefficients,
    is_sb_family,
    sb_terms,
    ScheduleKind,
)

__all__ = [
    "Method",
    "Traversal",
    "TimeGrid",
    "StepCoefficients",
    "SampleTrace",
    "Predictor",
    "NoClosedFormError",
    "SamplingError",
    "make_grid",
    "grid_for",
    "make_rng",
    "expint_coeffs",
    "step",
    "sample",
    "DEFAULT_T0",
    "MIN_CLEAN_T",
]

DEFAULT_T0 = 1e-4
MIN_CLEAN_T = 1e-6

Predictor = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


class Method(str, enum.Enum):
    EULER_ODE = "euler_ode"
    EULER_MARUYAMA = "euler_maruyama"
    EXPONENTIAL = "exponential"


class Traversal(str, enum.Enum):
    REVERSE = "reverse"
    FORWARD = "forward"


class NoClosedFormError(ValueError):
    """The exponential-integrator integrals have no tractable closed form."""


class SamplingError(RuntimeError):
    def __init__(self, message: str, step_index: int):
        super().__init__(f"step {step_index}: {message}")
        self.step_index = step_index


@dataclass(frozen=True)
class TimeGrid:
    """Ascending grid ``t_0 < ... < t_N`` plus the order in which it is walked."""

    points: tuple[float, ...]
    traversal: Traversal = Traversal.REVERSE

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "traversal", Traversal(self.traversal))
        if len(pts) < 2:
            raise ValueError("a grid needs at least one step")
        if any(not 0.0 <= p <= 1.0 for p in pts):
            raise ValueError("grid points must lie in [0, 1]")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("grid points must be strictly increasing")

    @property
    def n_steps(self) -> int:
        return len(self.points) - 1

    def ordered(self) -> list[float]:
        """Points in the order the sampler visits them."""
        if self.traversal is Traversal.REVERSE:
            return list(reversed(self.points))
        return list(self.points)


@dataclass(frozen=True)
class StepCoefficients:
    """One affine update ``x_t = xi * x_r + eta * s_hat + zeta * y``."""

    xi: float
    eta: float
    zeta: float


@dataclass
class SampleTrace:
    states: list[np.ndarray]
    predictions: list[np.ndarray]
    times: list[float]
    final: np.ndarray
    seed: int | None
    n_calls: int = 0
    coefficients: list[StepCoefficients] = field(default_factory=list)


def make_grid(
    t_start: float,
    t_end: float,
    n_steps: int,
    spacing: str = "uniform",
    traversal: Traversal | str = Traversal.REVERSE,
) -> TimeGrid:
    if spacing != "uniform":
        raise ValueError(f"unsupported grid spacing {spacing!r}")
    n_steps = int(n_steps)
    if n_steps < 1:
        raise ValueError("number of steps must be at least 1")
    lo, hi = float(t_start), float(t_end)
    if not (0.0 <= lo <= 1.0 and 0.0 <= hi <= 1.0):
        raise ValueError("grid endpoints must lie in [0, 1]")
    if lo == hi:
        raise ValueError("grid endpoints must differ")
    lo, hi = min(lo, hi), max(lo, hi)
    pts = lo + np.arange(n_steps + 1) * ((hi - lo) / n_steps)
    pts[-1] = hi
    return TimeGrid(tuple(pts.tolist()), Traversal(traversal))


def grid_for(sched: Schedule, n_steps: int, t0: float | None = None, tN: float | None = None) -> TimeGrid:
    """Uniform grid walked from the noisy towards the clean end of ``sched``.

    Defaults: ``[1e-4, 1]`` for schedules with the clean end at t=0,
    ``[0, 1]`` for OT-CFM (no singular endpoint).
    """
    if sched.direction is Direction.CLEAN_AT_T0:
        lo = DEFAULT_T0 if t0 is None else t0
        hi = 1.0 if tN is None else tN
        return make_grid(lo, hi, n_steps, traversal=Traversal.REVERSE)
    lo = 0.0 if t0 is None else t0
    hi = 1.0 if tN is None else tN
    return make_grid(lo, hi, n_steps, traversal=Traversal.FORWARD)


def make_rng(seed: int | None) -> np.random.Generator:
    """Counter-based (Philox) generator."""
    return np.random.Generator(np.random.Philox(seed))


def _at_dirac(sched: Schedule, t: float) -> bool:
    return any(t == end for end in dirac_endpoints(sched))


def expint_coeffs(sched: Schedule, t: float, r: float) -> StepCoefficients:
    """Closed-form exponential-integrator step from ``r`` to ``t``.

    Starting from a zero-variance point the state is pinned to the path mean,
    and the step reduces to the mean-path map ``(0, a_t, b_t)``.
    """
    if sched.kind is ScheduleKind.OT_CFM:
        ct = eval_coefficients(sched, t)
        cr = eval_coefficients(sched, r)
        dt = t - r
        return StepCoefficients(
            xi=ct.sigma / cr.sigma,
            eta=sched["sigma_max"] * dt / cr.sigma,
            zeta=-sched["sigma_min"] * dt / cr.sigma,
        )
    if not is_sb_family(sched):
        raise NoClosedFormError(
            f"no closed-form integrator for {sched.kind.value}; use an Euler method"
        )
    if t == r:
        return StepCoefficients(1.0, 0.0, 0.0)
    if _at_dirac(sched, r):
        ct = eval_coefficients(sched, t)
        return StepCoefficients(0.0, ct.a, ct.b)
    st = sb_terms(sched, t)
    sr = sb_terms(sched, r)
    rho_t, rho_r = math.sqrt(st.rho_sq), math.sqrt(sr.rho_sq)
    bar_t, bar_r = math.sqrt(st.rho_bar_sq), math.sqrt(sr.rho_bar_sq)
    rho1_sq = st.rho_sq_1
    return StepCoefficients(
        xi=(st.alpha * rho_t * bar_t) / (sr.alpha * rho_r * bar_r),
        eta=st.alpha / rho1_sq * (st.rho_bar_sq - bar_r * rho_t * bar_t / rho_r),
        zeta=st.alpha / (st.alpha_1 * rho1_sq) * (st.rho_sq - rho_r * rho_t * bar_t / bar_r),
    )


def _euler_spec(sched: Schedule, r: float, g: float, direction: DriftDirection) -> DriftSpec:
    if _at_dirac(sched, r):
        # the state sits on the mean, so only the mean velocity survives
        c = eval_coefficients(sched, r)
        return DriftSpec(0.0, c.da, c.db, g, direction)
    if direction is DriftDirection.ODE:
        return ode_spec(sched, r)
    return sde_spec(sched, r, g, direction)


def _standard_normal(rng: np.random.Generator, like: np.ndarray) -> np.ndarray:
    if np.iscomplexobj(like):
        return rng.standard_normal(like.shape) + 1j * rng.standard_normal(like.shape)
    return rng.standard_normal(like.shape)


def step(
    method: Method | str,
    sched: Schedule,
    x_r,
    s_hat,
    y,
    r: float,
    t: float,
    g: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Advance the state from time ``r`` to time ``t`` with the data estimate ``s_hat``."""
    method = Method(method)
    x_r = np.asarray(x_r)
    s_hat = np.asarray(s_hat)
    y = np.asarray(y)
    if method is not Method.EULER_MARUYAMA and g != 0.0:
        raise ValueError(f"{method.value} is deterministic; g must be 0")
    if method is Method.EXPONENTIAL:
        c = expint_coeffs(sched, t, r)
        return c.xi * x_r + c.eta * s_hat + c.zeta * y
    h = t - r
    if method is Method.EULER_ODE:
        spec = _euler_spec(sched, r, 0.0, DriftDirection.ODE)
        return x_r + h * spec.apply(x_r, s_hat, y)
    direction = DriftDirection.BACKWARD if h < 0 else DriftDirection.FORWARD
    spec = _euler_spec(sched, r, g, direction)
    out = x_r + h * spec.apply(x_r, s_hat, y)
    if g > 0.0:
        if rng is None:
            raise ValueError("euler_maruyama with g > 0 needs an rng")
        out = out + g * math.sqrt(abs(h)) * _standard_normal(rng, x_r)
    return out


def _expected_traversal(sched: Schedule) -> Traversal:
    return Traversal.REVERSE if sched.direction is Direction.CLEAN_AT_T0 else Traversal.FORWARD


def sample(
    sched: Schedule,
    y,
    predictor: Predictor,
    grid: TimeGrid,
    method: Method | str = Method.EXPONENTIAL,
    g: float = 0.0,
    seed: int | None = None,
    record: bool = True,
    init_noise: bool = False,
) -> SampleTrace:
    """Run the sampler from ``x = y`` at the noisy end of ``grid`` to its clean end.

    The predictor is called once per step, at the time the step starts from.
    ``init_noise`` adds ``N(0, sigma^2)`` at the start when the path is not
    pinned there (OUVE, OT-CFM); it is off by default.
    """
    method = Method(method)
    if grid.traversal is not _expected_traversal(sched):
        raise ValueError(
            f"{sched.kind.value} samples in {_expected_traversal(sched).value} time; "
            f"grid traversal is {grid.traversal.value}"
        )
    if sched.direction is Direction.CLEAN_AT_T0 and grid.points[0] < MIN_CLEAN_T:
        raise ValueError(f"t_0={grid.points[0]} is below the singularity clamp {MIN_CLEAN_T}")
    y = np.asarray(y)
    needs_rng = (method is Method.EULER_MARUYAMA and g > 0.0) or init_noise
    rng = make_rng(seed) if needs_rng else None

    times = grid.ordered()
    x = y.copy()
    if init_noise:
        sigma0 = eval_coefficients(sched, times[0]).sigma
        if sigma0 > 0.0:
            x = x + sigma0 * _standard_normal(rng, x)

    trace = SampleTrace(states=[], predictions=[], times=times, final=x, seed=seed)
    if record:
        trace.states.append(x.copy())
    for n, (r, t) in enumerate(zip(times, times[1:]), start=1):
        s_hat = np.asarray(predictor(x, y, r))
        trace.n_calls += 1
        if s_hat.shape != y.shape:
            raise ValueError(f"step {n}: predictor returned shape {s_hat.shape}, expected {y.shape}")
        if method is Method.EXPONENTIAL:
            coeffs = expint_coeffs(sched, t, r)
            x = coeffs.xi * x + coeffs.eta * s_hat + coeffs.zeta * y
            if record:
                trace.coefficients.append(coeffs)
        else:
            x = step(method, sched, x, s_hat, y, r, t, g=g, rng=rng)
        if not np.all(np.isfinite(x)):
            raise SamplingError(f"non-finite state at t={t}", n)
        if record:
            trace.predictions.append(s_hat.copy())
            trace.states.append(x.copy())
    trace.final = x
    return trace
