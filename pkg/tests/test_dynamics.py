import math

import numpy as np
import pytest

from bridgekit.dynamics import DriftDirection, marginal, ode_field, ode_spec, score, sde_drift, sde_spec
from bridgekit.schedules import aux_gtilde_sq, eval_coefficients, make_schedule

SCHEDULES = [
    make_schedule("OUVE", gamma=1.5, c=0.5, k=2.6),
    make_schedule("BBED", c=0.5, k=2.6),
    make_schedule("SB_GENERAL", c=0.4, k=2.6, f=0.3),
    make_schedule("SBVE", c=0.4, k=2.6),
    make_schedule("OT_CFM", sigma_min=0.05, sigma_max=0.5),
    make_schedule("SB_CFM", sigma=1.0),
]
SB_CFM = SCHEDULES[-1]


def test_marginal_sb_cfm():
    m = marginal(SB_CFM, np.array([1.0]), np.array([0.0]), 0.25)
    assert m.mean[0] == pytest.approx(0.75)
    assert m.sigma == pytest.approx(math.sqrt(0.1875))


def test_marginal_clean_end():
    s = np.array([1.0, -2.0 + 1j])
    m = marginal(SB_CFM, s, np.zeros(2, complex), 0.0)
    np.testing.assert_array_equal(m.mean, s)
    assert m.sigma == 0.0


def test_length_mismatch():
    with pytest.raises(ValueError, match="length mismatch"):
        marginal(SB_CFM, np.ones(3), np.ones(2), 0.5)


def test_score_cases():
    m = marginal(SB_CFM, np.array([0.3]), np.array([0.1]), 0.5)
    np.testing.assert_allclose(score(SB_CFM, m.mean, [0.3], [0.1], 0.5), [0.0])
    assert score(SB_CFM, m.mean + 1.0, [0.3], [0.1], 0.5)[0] == pytest.approx(-4.0)
    with pytest.raises(ValueError, match="degenerate marginal"):
        score(SB_CFM, [0.0], [0.0], [0.0], 0.0)


def test_ode_field_sb_cfm():
    assert ode_field(SB_CFM, 0.7, 1.0, 0.0, 0.5) == pytest.approx(-1.0)


def test_ode_field_constant_sigma_ot_cfm():
    s = make_schedule("OT_CFM", sigma_min=0.2, sigma_max=0.2)
    rng = np.random.default_rng(1)
    x, sv, y = rng.standard_normal((3, 5))
    np.testing.assert_allclose(ode_field(s, x, sv, y, 0.4), sv - y, atol=1e-15)


@pytest.mark.parametrize("sched", SCHEDULES, ids=lambda s: s.kind.value)
def test_ode_field_matches_finite_difference_velocity(sched):
    rng = np.random.default_rng(5)
    h = 1e-6
    for t in rng.uniform(0.05, 0.95, 5):
        x, s, y = rng.standard_normal(3)
        mu = lambda u: eval_coefficients(sched, u).a * s + eval_coefficients(sched, u).b * y
        sig = lambda u: eval_coefficients(sched, u).sigma
        dmu = (mu(t + h) - mu(t - h)) / (2 * h)
        dsig = (sig(t + h) - sig(t - h)) / (2 * h)
        expected = dsig / sig(t) * (x - mu(t)) + dmu
        assert float(ode_field(sched, x, s, y, t)) == pytest.approx(expected, rel=1e-6, abs=1e-8)


@pytest.mark.parametrize("sched", SCHEDULES, ids=lambda s: s.kind.value)
def test_sde_family_identities(sched):
    rng = np.random.default_rng(9)
    x, s, y = rng.standard_normal((3, 4))
    t, g = 0.42, 0.8
    fwd = sde_drift(sched, x, s, y, t, g, "forward")
    bwd = sde_drift(sched, x, s, y, t, g, "backward")
    np.testing.assert_allclose(sde_drift(sched, x, s, y, t, 0.0, "forward"), ode_field(sched, x, s, y, t))
    # the two directions straddle the ODE field symmetrically
    np.testing.assert_allclose(0.5 * (fwd + bwd), ode_field(sched, x, s, y, t), rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(bwd - fwd, -g * g * score(sched, x, s, y, t), rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("sched", [s for s in SCHEDULES if s.kind.value.startswith("SB")], ids=lambda s: s.kind.value)
def test_sb_forward_drift_with_aux_diffusion_drops_s(sched):
    for t in (0.1, 0.5, 0.9):
        spec = sde_spec(sched, t, math.sqrt(aux_gtilde_sq(sched, t)), DriftDirection.FORWARD)
        assert abs(spec.s_coeff) <= 1e-12


def test_negative_g_rejected():
    with pytest.raises(ValueError):
        sde_spec(SB_CFM, 0.5, -1.0, "forward")


def test_ode_spec_rejects_endpoint():
    with pytest.raises(ValueError):
        ode_spec(SB_CFM, 1.0)
