"""Probability-path schedules.

Every schedule defines the Gaussian path ``N(a_t s + b_t y, sigma_t^2 I)``
between a clean signal ``s`` and its noisy counterpart ``y``.  ``sigma`` is
always a standard deviation here, even for kinds whose natural closed form
is a variance.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

from .special import expint_ei

__all__ = [
    "ScheduleKind",
    "Direction",
    "Schedule",
    "PathCoefficients",
    "SBTerms",
    "make_schedule",
    "eval_coefficients",
    "aux_gtilde_sq",
    "sb_terms",
    "dirac_endpoints",
    "is_sb_family",
    "parse_kind",
    "required_params",
]

# (1 - t) below this uses the analytic limit (1 - t) * Ei(-lambda (1 - t)) -> 0
BBED_LIMIT_GAP = 1e-8


class ScheduleKind(str, enum.Enum):
    OUVE = "OUVE"
    BBED = "BBED"
    SB_GENERAL = "SB_GENERAL"
    SBVE = "SBVE"
    OT_CFM = "OT_CFM"
    SB_CFM = "SB_CFM"


class Direction(str, enum.Enum):
    CLEAN_AT_T0 = "clean_at_t0"
    CLEAN_AT_T1 = "clean_at_t1"


_REQUIRED: dict[ScheduleKind, tuple[str, ...]] = {
    ScheduleKind.OUVE: ("gamma", "c", "k"),
    ScheduleKind.BBED: ("c", "k"),
    ScheduleKind.SB_GENERAL: ("c", "k", "f"),
    ScheduleKind.SBVE: ("c", "k"),
    ScheduleKind.OT_CFM: ("sigma_min", "sigma_max"),
    ScheduleKind.SB_CFM: ("sigma",),
}

# f is a drift rate and may take either sign
_SIGNED = {"f"}

_SB_KINDS = (ScheduleKind.SB_GENERAL, ScheduleKind.SBVE, ScheduleKind.SB_CFM)

_ALIASES = {
    "ouve": ScheduleKind.OUVE,
    "bbed": ScheduleKind.BBED,
    "sb": ScheduleKind.SB_GENERAL,
    "sb-general": ScheduleKind.SB_GENERAL,
    "sb_general": ScheduleKind.SB_GENERAL,
    "sbve": ScheduleKind.SBVE,
    "ot-cfm": ScheduleKind.OT_CFM,
    "ot_cfm": ScheduleKind.OT_CFM,
    "otcfm": ScheduleKind.OT_CFM,
    "sb-cfm": ScheduleKind.SB_CFM,
    "sb_cfm": ScheduleKind.SB_CFM,
    "sbcfm": ScheduleKind.SB_CFM,
}


def parse_kind(kind: str | ScheduleKind) -> ScheduleKind:
    if isinstance(kind, ScheduleKind):
        return kind
    key = str(kind).strip()
    try:
        return ScheduleKind(key.upper())
    except ValueError:
        pass
    try:
        return _ALIASES[key.lower()]
    except KeyError:
        raise ValueError(f"unknown schedule kind {kind!r}") from None


def required_params(kind: str | ScheduleKind) -> tuple[str, ...]:
    return _REQUIRED[parse_kind(kind)]


@dataclass(frozen=True)
class Schedule:
    kind: ScheduleKind
    params: Mapping[str, float] = field(default_factory=dict)

    @property
    def direction(self) -> Direction:
        if self.kind is ScheduleKind.OT_CFM:
            return Direction.CLEAN_AT_T1
        return Direction.CLEAN_AT_T0

    @property
    def clean_time(self) -> float:
        return 0.0 if self.direction is Direction.CLEAN_AT_T0 else 1.0

    @property
    def noisy_time(self) -> float:
        return 1.0 - self.clean_time

    def __getitem__(self, name: str) -> float:
        return self.params[name]

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "params": dict(self.params)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, obj: Mapping[str, Any]) -> "Schedule":
        if "kind" not in obj:
            raise ValueError("schedule object needs a 'kind' field")
        return make_schedule(obj["kind"], obj.get("params", {}))

    @classmethod
    def from_json(cls, text: str) -> "Schedule":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class PathCoefficients:
    a: float
    b: float
    sigma: float
    da: float
    db: float
    dsigma: float

    @property
    def variance(self) -> float:
        return self.sigma * self.sigma


@dataclass(frozen=True)
class SBTerms:
    """alpha_t, rho_t^2 and their noisy-endpoint values for the SB family."""

    alpha: float
    rho_sq: float
    rho_bar_sq: float
    alpha_1: float
    rho_sq_1: float
    f: float
    # d(rho_t^2)/dt = g_t^2 / alpha_t^2
    drho_sq: float


def make_schedule(kind: str | ScheduleKind, params: Mapping[str, float] | None = None, **kwargs: float) -> Schedule:
    """Build a validated schedule; every parameter of the kind is mandatory."""
    kind = parse_kind(kind)
    merged: dict[str, float] = dict(params or {})
    merged.update(kwargs)
    required = _REQUIRED[kind]
    extra = sorted(set(merged) - set(required))
    if extra:
        raise ValueError(f"unexpected parameter(s) for {kind.value}: {', '.join(extra)}")
    clean: dict[str, float] = {}
    for name in required:
        if name not in merged:
            raise ValueError(f"missing parameter {name} for {kind.value}")
        try:
            value = float(merged[name])
        except (TypeError, ValueError):
            raise ValueError(f"parameter {name} must be a number") from None
        if not math.isfinite(value):
            raise ValueError(f"non-finite parameter {name}")
        if name not in _SIGNED and value <= 0.0:
            raise ValueError(f"non-positive parameter {name}")
        clean[name] = value
    if "k" in clean and clean["k"] <= 1.0:
        raise ValueError("parameter k must exceed 1 for VE schedules")
    return Schedule(kind, clean)


def is_sb_family(sched: Schedule) -> bool:
    return sched.kind in _SB_KINDS


def dirac_endpoints(sched: Schedule) -> tuple[float, ...]:
    """Times at which the path has zero variance."""
    if sched.kind is ScheduleKind.OT_CFM:
        return ()
    if sched.kind is ScheduleKind.OUVE:
        return (0.0,)
    return (0.0, 1.0)


def _check_t(t: float) -> float:
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t={t} outside [0, 1]")
    return t


def _expm1_ratio(z: float) -> float:
    """expm1(z) / z with the removable singularity filled in."""
    if abs(z) < 1e-8:
        return 1.0 + 0.5 * z
    return math.expm1(z) / z


def _sb_params(sched: Schedule) -> tuple[float, float, float]:
    """(c, beta, f) with rho_t^2 = int_0^t c exp(2 beta tau) dtau and alpha_t = exp(f t)."""
    p = sched.params
    if sched.kind is ScheduleKind.SB_CFM:
        return p["sigma"] ** 2, 0.0, 0.0
    if sched.kind is ScheduleKind.SBVE:
        return p["c"], math.log(p["k"]), 0.0
    if sched.kind is ScheduleKind.SB_GENERAL:
        return p["c"], math.log(p["k"]) - p["f"], p["f"]
    raise ValueError(f"{sched.kind.value} is not a Schroedinger-bridge schedule")


def sb_terms(sched: Schedule, t: float) -> SBTerms:
    t = _check_t(t)
    c, beta, f = _sb_params(sched)
    rho_sq = c * t * _expm1_ratio(2.0 * beta * t)
    rho_sq_1 = c * _expm1_ratio(2.0 * beta)
    # computed directly rather than as rho_1^2 - rho_t^2 to keep precision near t=1
    rho_bar_sq = c * math.exp(2.0 * beta * t) * (1.0 - t) * _expm1_ratio(2.0 * beta * (1.0 - t))
    return SBTerms(
        alpha=math.exp(f * t),
        rho_sq=rho_sq,
        rho_bar_sq=rho_bar_sq,
        alpha_1=math.exp(f),
        rho_sq_1=rho_sq_1,
        f=f,
        drho_sq=c * math.exp(2.0 * beta * t),
    )


def _sb_coefficients(sched: Schedule, t: float) -> tuple[float, float, float, float, float, float]:
    sb = sb_terms(sched, t)
    a = sb.alpha * sb.rho_bar_sq / sb.rho_sq_1
    b = sb.alpha * sb.rho_sq / (sb.alpha_1 * sb.rho_sq_1)
    var = sb.alpha**2 * sb.rho_bar_sq * sb.rho_sq / sb.rho_sq_1
    da = sb.f * a - sb.alpha * sb.drho_sq / sb.rho_sq_1
    db = sb.f * b + sb.alpha * sb.drho_sq / (sb.alpha_1 * sb.rho_sq_1)
    dvar = 2.0 * sb.f * var + sb.alpha**2 * sb.drho_sq * (sb.rho_bar_sq - sb.rho_sq) / sb.rho_sq_1
    return a, b, var, da, db, dvar


def _ouve_coefficients(sched: Schedule, t: float) -> tuple[float, float, float, float, float, float]:
    gamma, c, k = sched["gamma"], sched["c"], sched["k"]
    log_k = math.log(k)
    a = math.exp(-gamma * t)
    b = -math.expm1(-gamma * t)
    denom = 2.0 * (gamma + log_k)
    var = c * (math.expm1(2.0 * log_k * t) - math.expm1(-2.0 * gamma * t)) / denom
    dvar = c * (2.0 * log_k * k ** (2.0 * t) + 2.0 * gamma * math.exp(-2.0 * gamma * t)) / denom
    return a, b, var, -gamma * a, gamma * a, dvar


def _bbed_ei_gap(lam: float, t: float) -> float:
    """(1 - t) * Ei(-lam (1 - t)), with its limit 0 at t -> 1."""
    gap = 1.0 - t
    if gap < BBED_LIMIT_GAP:
        return 0.0
    return gap * expint_ei(-lam * gap)


def _bbed_coefficients(sched: Schedule, t: float) -> tuple[float, float, float, float, float, float]:
    c, k = sched["c"], sched["k"]
    lam = 2.0 * math.log(k)
    gap = 1.0 - t
    k2t = k ** (2.0 * t)
    ei_end = expint_ei(-lam)
    gap_ei = _bbed_ei_gap(lam, t)
    # E_t = (k^{2t} - 1 + t) + 2 k^2 log k * (1 - t) * (Ei[2(t-1) log k] - Ei[-2 log k])
    e_t = (k2t - 1.0 + t) + lam * k * k * (gap_ei - gap * ei_end)
    var = c * gap * e_t
    # (1 - t) dE_t/dt, differentiating the closed form term by term
    gap_de = gap - lam * k * k * (gap_ei - gap * ei_end)
    dvar = -c * e_t + c * gap_de
    return 1.0 - t, t, max(var, 0.0), -1.0, 1.0, dvar


def _otcfm_coefficients(sched: Schedule, t: float) -> PathCoefficients:
    lo, hi = sched["sigma_min"], sched["sigma_max"]
    return PathCoefficients(a=t, b=1.0 - t, sigma=(1.0 - t) * hi + t * lo, da=1.0, db=-1.0, dsigma=lo - hi)


def eval_coefficients(sched: Schedule, t: float) -> PathCoefficients:
    """Path coefficients ``(a, b, sigma)`` and their time derivatives at ``t``."""
    t = _check_t(t)
    kind = sched.kind
    if kind is ScheduleKind.OT_CFM:
        return _otcfm_coefficients(sched, t)
    if kind is ScheduleKind.OUVE:
        a, b, var, da, db, dvar = _ouve_coefficients(sched, t)
    elif kind is ScheduleKind.BBED:
        a, b, var, da, db, dvar = _bbed_coefficients(sched, t)
    else:
        a, b, var, da, db, dvar = _sb_coefficients(sched, t)
    if t in dirac_endpoints(sched):
        var = 0.0
    sigma = math.sqrt(max(var, 0.0))
    if sigma > 0.0:
        dsigma = dvar / (2.0 * sigma)
    else:
        dsigma = math.copysign(math.inf, dvar) if dvar != 0.0 else 0.0
    return PathCoefficients(a=a, b=b, sigma=sigma, da=da, db=db, dsigma=dsigma)


def aux_gtilde_sq(sched: Schedule, t: float) -> float:
    """Squared auxiliary diffusion coefficient tying the path back to its original SDE.

    OUVE: ``(sigma^2)' + 2 gamma sigma^2``; BBED: ``(sigma^2)' + 2 sigma^2 / (1 - t)``;
    SB family: ``alpha_t^2 (rho_t^2)'``.
    """
    t = _check_t(t)
    kind = sched.kind
    if kind is ScheduleKind.OUVE:
        _, _, var, _, _, dvar = _ouve_coefficients(sched, t)
        return dvar + 2.0 * sched["gamma"] * var
    if kind is ScheduleKind.BBED:
        if t >= 1.0:
            raise ValueError("BBED auxiliary diffusion is singular at t=1")
        _, _, var, _, _, dvar = _bbed_coefficients(sched, t)
        return dvar + 2.0 * var / (1.0 - t)
    if kind in _SB_KINDS:
        sb = sb_terms(sched, t)
        return sb.alpha**2 * sb.drho_sq
    raise ValueError(f"no auxiliary diffusion coefficient is defined for {kind.value}")
