"""Numerical certification of the bridge framework.

Independent routes are compared against each other: closed-form drifts of
the original OUVE/BBED/SB models against the unified vector field,
quadrature against closed-form integrator coefficients, and Monte Carlo
forward-SDE marginals against the analytic path.
"""

from __future__ import annotations

import enum
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np
from scipy import integrate

from .dynamics import DriftDirection, marginal, ode_field, sde_spec
from .schedules import (
    Direction,
    Schedule,
    ScheduleKind,
    aux_gtilde_sq,
    dirac_endpoints,
    eval_coefficients,
    make_schedule,
    sb_terms,
)
from .samplers import StepCoefficients, step

__all__ = [
    "Family",
    "MarginalStats",
    "EquivalenceReport",
    "CheckResult",
    "ConvergenceError",
    "mc_forward_marginals",
    "marginals_pass",
    "drift_equivalence_residual",
    "coeff_quadrature_oracle",
    "otcfm_equivalence_residual",
    "ei_quadrature",
    "gauss_legendre_adaptive",
    "thread_cap",
    "run_all",
]

MC_CHUNK = 2048


class Family(str, enum.Enum):
    OUVE = "OUVE"
    BBED = "BBED"
    SB = "SB"
    OTCFM_EULER = "OTCFM_EULER"


class ConvergenceError(ArithmeticError):
    pass


@dataclass
class MarginalStats:
    t: float
    empirical_mean: np.ndarray
    empirical_std: float
    expected_mean: np.ndarray
    expected_std: float
    n_trajectories: int

    def to_dict(self) -> dict[str, Any]:
        def vec(v):
            v = np.asarray(v)
            if np.iscomplexobj(v):
                return {"real": v.real.tolist(), "imag": v.imag.tolist()}
            return v.tolist()

        return {
            "t": self.t,
            "empirical_mean": vec(self.empirical_mean),
            "empirical_std": self.empirical_std,
            "expected_mean": vec(self.expected_mean),
            "expected_std": self.expected_std,
            "n_trajectories": self.n_trajectories,
        }


@dataclass(frozen=True)
class EquivalenceReport:
    family: Family
    max_residual: float
    points_tested: int
    # "relative" for drift identities, "absolute" for the OT-CFM step identity
    residual_kind: str = "relative"


@dataclass
class CheckResult:
    check: str
    residual_or_stats: Any
    tolerance: Any
    passed: bool
    seconds: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "check": self.check,
            "residual_or_stats": self.residual_or_stats,
            "tolerance": self.tolerance,
            "pass": bool(self.passed),
        }


def thread_cap() -> int:
    """Worker count, capped by the BRIDGEKIT_THREADS environment variable."""
    env = os.environ.get("BRIDGEKIT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


# --------------------------------------------------------------------------
# Monte Carlo marginals of the forward SDE family


def _as_real(v: np.ndarray) -> tuple[np.ndarray, bool]:
    v = np.asarray(v)
    if np.iscomplexobj(v):
        return np.concatenate([v.real.ravel(), v.imag.ravel()]), True
    return v.astype(float).ravel(), False


def _from_real(v: np.ndarray, is_complex: bool, shape) -> np.ndarray:
    if not is_complex:
        return v.reshape(shape)
    half = v.size // 2
    return (v[:half] + 1j * v[half:]).reshape(shape)


def mc_forward_marginals(
    sched: Schedule,
    s,
    y,
    g_scale: float,
    checkpoints: Sequence[float],
    M: int = 20000,
    dt: float = 1e-3,
    seed: int = 0,
) -> list[MarginalStats]:
    """Euler-Maruyama simulation of the forward SDE with ``g = g_scale * g_tilde``.

    Trajectories leave the clean Dirac endpoint at t=0.  The drift is singular
    there, so the first increment (0 -> dt) is drawn from the exact Gaussian
    transition; when ``g_scale = 0`` no noise ever enters and the state stays
    on the mean path.  Trajectories run in fixed-size chunks with spawned
    seeds, so the result does not depend on the worker count.
    """
    if M < 100:
        raise ValueError("need at least 100 trajectories")
    if not 0.0 < dt <= 1e-2:
        raise ValueError("dt must be in (0, 1e-2]")
    if g_scale < 0.0:
        raise ValueError("g_scale must be non-negative")
    if sched.direction is not Direction.CLEAN_AT_T0 or 0.0 not in dirac_endpoints(sched):
        raise ValueError(f"{sched.kind.value} has no clean Dirac endpoint at t=0")
    ends = dirac_endpoints(sched)
    steps_at = {}
    for t in checkpoints:
        if not 0.0 < t < 1.0 or any(abs(t - e) < 1e-12 for e in ends):
            raise ValueError(f"checkpoint t={t} is at a singular endpoint")
        n = int(round(t / dt))
        if n < 1:
            raise ValueError(f"checkpoint t={t} is shorter than one step")
        steps_at[n] = t
    n_total = max(steps_at)

    s = np.asarray(s)
    y = np.asarray(y)
    shape = s.shape
    s_r, is_complex = _as_real(s)
    y_r, _ = _as_real(y)

    c1 = eval_coefficients(sched, dt)
    start_mean = c1.a * s_r + c1.b * y_r
    start_std = c1.sigma if g_scale > 0.0 else 0.0
    # drift triples and diffusion at t_n = n dt, n = 1 .. n_total - 1
    specs = []
    for n in range(1, n_total):
        t = n * dt
        g = g_scale * math.sqrt(aux_gtilde_sq(sched, t))
        sp = sde_spec(sched, t, g, DriftDirection.FORWARD)
        specs.append((sp.state_coeff, sp.s_coeff * s_r + sp.y_coeff * y_r, g * math.sqrt(dt)))

    n_chunks = math.ceil(M / MC_CHUNK)
    seqs = np.random.SeedSequence(seed).spawn(n_chunks)
    sizes = [min(MC_CHUNK, M - i * MC_CHUNK) for i in range(n_chunks)]

    def run_chunk(i: int) -> dict[int, np.ndarray]:
        rng = np.random.Generator(np.random.Philox(seqs[i]))
        m = sizes[i]
        x = start_mean + start_std * rng.standard_normal((m, s_r.size))
        snaps = {}
        if 1 in steps_at:
            snaps[1] = x.copy()
        for n, (k, offset, noise) in enumerate(specs, start=1):
            x = x + dt * (k * x + offset)
            if noise > 0.0:
                x = x + noise * rng.standard_normal(x.shape)
            if n + 1 in steps_at:
                snaps[n + 1] = x.copy()
        return snaps

    with ThreadPoolExecutor(max_workers=min(thread_cap(), n_chunks)) as pool:
        chunks = list(pool.map(run_chunk, range(n_chunks)))

    out = []
    for n in sorted(steps_at):
        t_exact = n * dt
        xs = np.concatenate([c[n] for c in chunks], axis=0)
        emp_mean = xs.mean(axis=0)
        emp_std = float(np.sqrt(np.mean(xs.var(axis=0, ddof=1))))
        exp = marginal(sched, s_r, y_r, t_exact)
        # without noise the flow out of a Dirac point never spreads
        expected_std = exp.sigma if g_scale > 0.0 else 0.0
        out.append(
            MarginalStats(
                t=t_exact,
                empirical_mean=_from_real(emp_mean, is_complex, shape),
                empirical_std=emp_std,
                expected_mean=_from_real(exp.mean, is_complex, shape),
                expected_std=expected_std,
                n_trajectories=M,
            )
        )
    return out


def marginals_pass(stats: Sequence[MarginalStats], mean_sigmas: float = 5.0, std_rel: float = 0.05) -> bool:
    """Mean within ``mean_sigmas * sigma_t / sqrt(M)`` per component, std within ``std_rel``."""
    for st in stats:
        dev_r, _ = _as_real(np.asarray(st.empirical_mean) - np.asarray(st.expected_mean))
        ref, _ = _as_real(st.expected_mean)
        tol = mean_sigmas * st.expected_std / math.sqrt(st.n_trajectories)
        tol = np.maximum(tol, 1e-9 * (1.0 + np.abs(ref)))
        if np.any(np.abs(dev_r) > tol):
            return False
        if st.expected_std == 0.0:
            if st.empirical_std > 1e-12:
                return False
        elif abs(st.empirical_std / st.expected_std - 1.0) > std_rel:
            return False
    return True


# --------------------------------------------------------------------------
# Drift-level equivalences with the original model definitions


def _rel(values: Sequence[float], terms: Sequence[float]) -> float:
    scale = math.fsum(abs(v) for v in terms)
    spread = max(values) - min(values)
    return spread / scale if scale > 0 else spread


def _ouve_point(rng: np.random.Generator) -> float:
    sched = make_schedule("OUVE", gamma=rng.uniform(0.5, 3.0), c=rng.uniform(0.05, 1.0), k=rng.uniform(1.5, 20.0))
    gamma, c, k = sched["gamma"], sched["c"], sched["k"]
    t = rng.uniform(0.01, 0.99)
    x, s, y = rng.standard_normal(3)
    var = c * (k ** (2 * t) - math.exp(-2 * gamma * t)) / (2 * (gamma + math.log(k)))
    e = math.exp(-gamma * t)
    # original PFODE: gamma (y - x) - g^2/2 * score with g^2 = c k^{2t}
    g2 = c * k ** (2 * t)
    orig_terms = [gamma * y, -gamma * x, g2 / (2 * var) * x, -g2 / (2 * var) * e * s, -g2 / (2 * var) * (1 - e) * y]
    # unified ODE written with the auxiliary coefficient
    gt2 = aux_gtilde_sq(sched, t)
    q = gt2 / (2 * var)
    unified = (q - gamma) * x - e * q * s + (gamma - q * (1 - e)) * y
    framework = float(ode_field(sched, x, s, y, t))
    return _rel([math.fsum(orig_terms), unified, framework], orig_terms)


def _bbed_point(rng: np.random.Generator) -> float:
    sched = make_schedule("BBED", c=rng.uniform(0.05, 1.0), k=rng.uniform(1.5, 20.0))
    c, k = sched["c"], sched["k"]
    t = rng.uniform(0.01, 0.99)
    x, s, y = rng.standard_normal(3)
    var = eval_coefficients(sched, t).variance
    g2 = c * k ** (2 * t)
    q0 = g2 / (2 * var)
    orig_terms = [y / (1 - t), -x / (1 - t), q0 * x, -q0 * (1 - t) * s, -q0 * t * y]
    gt2 = aux_gtilde_sq(sched, t)
    q = gt2 / (2 * var)
    unified = (q - 1 / (1 - t)) * x - (1 - t) * q * s + (1 / (1 - t) - q * t) * y
    framework = float(ode_field(sched, x, s, y, t))
    return _rel([math.fsum(orig_terms), unified, framework], orig_terms)


def _sb_point(rng: np.random.Generator) -> float:
    sched = make_schedule(
        "SB_GENERAL", c=rng.uniform(0.05, 1.0), k=rng.uniform(1.5, 20.0), f=rng.uniform(-1.5, 1.5)
    )
    c, k, f = sched["c"], sched["k"], sched["f"]
    t = rng.uniform(0.01, 0.99)
    x, s, y = rng.standard_normal(3)
    sb = sb_terms(sched, t)
    alpha, alpha_bar = sb.alpha, sb.alpha / sb.alpha_1
    rho2, rbar2 = sb.rho_sq, sb.rho_bar_sq
    g2 = c * k ** (2 * t)
    # probability-flow ODE of the original SB formulation
    orig_terms = [
        f * x,
        -0.5 * g2 * x / (alpha**2 * rbar2),
        0.5 * g2 * alpha_bar * y / (alpha**2 * rbar2),
        0.5 * g2 * x / (alpha**2 * rho2),
        -0.5 * g2 * alpha * s / (alpha**2 * rho2),
    ]
    gt2 = aux_gtilde_sq(sched, t)
    unified = (
        (f + gt2 / (2 * alpha**2) * (1 / rho2 - 1 / rbar2)) * x
        - gt2 / (2 * alpha * rho2) * s
        + alpha_bar * gt2 / (2 * alpha**2 * rbar2) * y
    )
    framework = float(ode_field(sched, x, s, y, t))
    return _rel([math.fsum(orig_terms), unified, framework], orig_terms)


_POINTS: dict[Family, Callable[[np.random.Generator], float]] = {
    Family.OUVE: _ouve_point,
    Family.BBED: _bbed_point,
    Family.SB: _sb_point,
}


def drift_equivalence_residual(family: Family | str, n_points: int = 1000, seed: int = 0) -> EquivalenceReport:
    """Max relative disagreement between the original PFODE and the unified ODE.

    Each draw picks fresh schedule parameters and a scalar ``(x, s, y, t)``;
    the residual is the spread of the three drift evaluations divided by the
    sum of absolute term magnitudes of the original form.
    """
    family = Family(family)
    if family not in _POINTS:
        raise ValueError(f"no drift identity for {family.value}")
    if n_points < 1:
        raise ValueError("n_points must be positive")
    rng = np.random.default_rng(seed)
    worst = max(_POINTS[family](rng) for _ in range(n_points))
    return EquivalenceReport(family, worst, n_points)


# --------------------------------------------------------------------------
# Quadrature oracle for integrator coefficients


def gauss_legendre_adaptive(
    func: Callable[[float], float],
    a: float,
    b: float,
    n_nodes: int = 16,
    tol: float = 1e-10,
    max_depth: int = 40,
) -> float:
    """Adaptive bisection with a fixed ``n_nodes``-point Gauss-Legendre rule."""
    nodes, weights = np.polynomial.legendre.leggauss(n_nodes)

    def rule(lo: float, hi: float) -> float:
        half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
        return half * math.fsum(w * func(mid + half * z) for z, w in zip(nodes, weights))

    def recurse(lo: float, hi: float, whole: float, depth: int) -> float:
        mid = 0.5 * (lo + hi)
        left, right = rule(lo, mid), rule(mid, hi)
        both = left + right
        if abs(both - whole) <= tol * max(abs(both), 1e-300) or abs(both - whole) < 1e-300:
            return both
        if depth >= max_depth:
            raise ConvergenceError(f"quadrature on [{lo}, {hi}] did not reach tolerance {tol}")
        return recurse(lo, mid, left, depth + 1) + recurse(mid, hi, right, depth + 1)

    if a == b:
        return 0.0
    return recurse(a, b, rule(a, b), 0)


def coeff_quadrature_oracle(sched: Schedule, t: float, r: float, n_nodes: int = 16) -> StepCoefficients:
    """Integrator coefficients by direct quadrature of the ODE forcing terms."""
    if n_nodes < 16:
        raise ValueError("use at least 16 quadrature nodes")
    if t == r:
        return StepCoefficients(1.0, 0.0, 0.0)
    sigma_t = eval_coefficients(sched, t).sigma
    sigma_r = eval_coefficients(sched, r).sigma
    if sigma_t <= 0.0 or sigma_r <= 0.0:
        raise ValueError("quadrature oracle needs interior times")

    def forcing(tau: float) -> tuple[float, float]:
        c = eval_coefficients(sched, tau)
        rate = c.dsigma / c.sigma
        return (c.da - c.a * rate) / c.sigma, (c.db - c.b * rate) / c.sigma

    m_int = gauss_legendre_adaptive(lambda u: forcing(u)[0], r, t, n_nodes)
    n_int = gauss_legendre_adaptive(lambda u: forcing(u)[1], r, t, n_nodes)
    return StepCoefficients(sigma_t / sigma_r, sigma_t * m_int, sigma_t * n_int)


# --------------------------------------------------------------------------
# OT-CFM: exponential integrator versus Euler


def otcfm_equivalence_residual(params: Schedule | dict, n_steps: int = 1000, seed: int = 0) -> EquivalenceReport:
    sched = params if isinstance(params, Schedule) else make_schedule("OT_CFM", params)
    if sched.kind is not ScheduleKind.OT_CFM:
        raise ValueError("OT-CFM equivalence needs an OT-CFM schedule")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_steps):
        r, t = np.sort(rng.uniform(0.0, 1.0, 2))
        x, s, y = rng.standard_normal((3, 4))
        a = step("exponential", sched, x, s, y, float(r), float(t))
        b = step("euler_ode", sched, x, s, y, float(r), float(t))
        worst = max(worst, float(np.max(np.abs(a - b))))
    return EquivalenceReport(Family.OTCFM_EULER, worst, n_steps, residual_kind="absolute")


# --------------------------------------------------------------------------
# Ei quadrature oracle


def ei_quadrature(x: float) -> float:
    """``Ei(x)`` for ``x < 0`` as ``-int_1^inf exp(x v) / v dv``."""
    if not x < 0.0:
        raise ValueError("quadrature oracle covers x < 0 only")
    val, _ = integrate.quad(lambda v: math.exp(x * v) / v, 1.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=400)
    return -val


def _timed(fn: Callable[[], CheckResult]) -> CheckResult:
    start = time.perf_counter()
    res = fn()
    res.seconds = time.perf_counter() - start
    return res


# --------------------------------------------------------------------------
# Full suite


def _check_drift(family: str, seed: int) -> CheckResult:
    rep = drift_equivalence_residual(family, 1000, seed)
    return CheckResult(f"drift_equivalence_{family}", rep.max_residual, 1e-10, rep.max_residual <= 1e-10)


def _check_otcfm(seed: int) -> CheckResult:
    rep = otcfm_equivalence_residual({"sigma_min": 0.05, "sigma_max": 0.5}, 1000, seed)
    return CheckResult("otcfm_exponential_vs_euler", rep.max_residual, 1e-12, rep.max_residual <= 1e-12)


def _check_quadrature(kind: str, params: dict, seed: int) -> CheckResult:
    from .samplers import expint_coeffs

    sched = make_schedule(kind, params)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        lo, hi = np.sort(rng.uniform(0.01, 0.99, 2))
        t, r = float(lo), float(hi)
        q = coeff_quadrature_oracle(sched, t, r)
        c = expint_coeffs(sched, t, r)
        for a, b in zip((q.xi, q.eta, q.zeta), (c.xi, c.eta, c.zeta)):
            worst = max(worst, abs(a - b) / max(abs(b), 1e-300))
    return CheckResult(f"quadrature_oracle_{kind}", worst, 1e-8, worst <= 1e-8)


def _check_mc(g_scale: float, seed: int) -> CheckResult:
    sched = make_schedule("SB_CFM", sigma=1.0)
    rng = np.random.default_rng(seed)
    s = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    y = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    stats = mc_forward_marginals(sched, s, y, g_scale, [0.25, 0.5, 0.75], 20000, 1e-3, seed)
    return CheckResult(
        f"fokker_planck_marginals_g{g_scale}",
        [st.to_dict() for st in stats],
        {"mean_sigmas": 5.0, "std_rel": 0.05},
        marginals_pass(stats),
    )


def _check_ei(seed: int) -> CheckResult:
    from .special import expint_ei

    rng = np.random.default_rng(seed)
    xs = -np.exp(rng.uniform(math.log(1e-3), math.log(20.0), 100))
    worst = max(abs(expint_ei(float(x)) / ei_quadrature(float(x)) - 1.0) for x in xs)
    return CheckResult("ei_accuracy", worst, 1e-9, worst <= 1e-9)


def _check_weights() -> CheckResult:
    from .composition import schedule_weights
    from .samplers import grid_for

    sched = make_schedule("SB_CFM", sigma=1.0)
    grid = grid_for(sched, 10, t0=1e-4)
    closed = schedule_weights(sched, grid, "closed")
    rec = schedule_weights(sched, grid, "recursion")
    err = {
        "w_y_rel": abs(closed.w_y / 1e-4 - 1.0),
        "w_y_recursion": abs(rec.w_y - closed.w_y),
        "unit_sum": abs(closed.total - 1.0),
        "recursion_vs_closed": max(abs(a - b) for a, b in zip(closed.w, rec.w)),
        "final_call_weight": closed.w[0],
    }
    ok = (
        err["w_y_rel"] <= 1e-12
        and err["w_y_recursion"] <= 1e-10
        and err["unit_sum"] <= 1e-9
        and err["recursion_vs_closed"] <= 1e-10
        and closed.w[0] >= 0.95
        and closed.w[0] == max(closed.w)
    )
    tol = {"w_y_rel": 1e-12, "w_y_recursion": 1e-10, "unit_sum": 1e-9, "recursion_vs_closed": 1e-10, "final_call_weight": 0.95}
    return CheckResult("sb_cfm_weight_profile", err, tol, ok)


def run_all(seed: int = 0) -> list[CheckResult]:
    """Every certification check, in a fixed order."""
    jobs: list[Callable[[], CheckResult]] = [
        lambda: _check_ei(seed),
        lambda: _check_drift("OUVE", seed),
        lambda: _check_drift("BBED", seed),
        lambda: _check_drift("SB", seed),
        lambda: _check_otcfm(seed),
        lambda: _check_quadrature("SBVE", {"c": 0.4, "k": 2.6}, seed),
        lambda: _check_quadrature("SB_CFM", {"sigma": 1.0}, seed),
        lambda: _check_mc(0.5, seed),
        lambda: _check_mc(1.0, seed),
        _check_weights,
    ]
    return [_timed(job) for job in jobs]
