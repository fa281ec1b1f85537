import numpy as np
import pytest

from bridgekit.composition import (
    compose_output,
    profile_to_csv,
    recompose_trace,
    schedule_weights,
    weights_closed_form_sb,
    weights_from_coeffs,
)
from bridgekit.samplers import StepCoefficients, grid_for, sample
from bridgekit.schedules import make_schedule, sb_terms

SB_CFM = make_schedule("SB_CFM", sigma=1.0)
SBVE = make_schedule("SBVE", c=0.4, k=2.6)


def brute_force_weights(sched, grid):
    """Run the sampler on one-hot predictions; the final state lists the weights."""
    n = grid.n_steps
    y = np.zeros(n + 1)
    y[n] = 1.0
    calls = []

    def predictor(x, yy, t):
        e = np.zeros(n + 1)
        e[len(calls)] = 1.0
        calls.append(t)
        return e

    final = sample(sched, y, predictor, grid).final
    # call k (0-based, in sampling order) is weight index n - 1 - k
    return final[:n][::-1], final[n]


class TestRecursion:
    def test_single_step(self):
        p = weights_from_coeffs([StepCoefficients(0.0, 0.7, 0.3)])
        assert p.w == (0.7,) and p.w_y == 0.3

    def test_empty(self):
        with pytest.raises(ValueError):
            weights_from_coeffs([])

    @pytest.mark.parametrize("sched", [SB_CFM, SBVE, make_schedule("SB_GENERAL", c=0.3, k=2, f=0.4)], ids=lambda s: s.kind.value)
    @pytest.mark.parametrize("n", [1, 4, 10])
    def test_matches_brute_force(self, sched, n):
        grid = grid_for(sched, n)
        w, w_y = brute_force_weights(sched, grid)
        p = schedule_weights(sched, grid, "recursion")
        np.testing.assert_allclose(p.w, w, rtol=1e-12, atol=1e-15)
        assert p.w_y == pytest.approx(w_y, rel=1e-12, abs=1e-15)

    def test_ot_cfm_brute_force(self):
        s = make_schedule("OT_CFM", sigma_min=0.05, sigma_max=0.5)
        grid = grid_for(s, 6)
        w, w_y = brute_force_weights(s, grid)
        p = schedule_weights(s, grid)
        np.testing.assert_allclose(p.w, w, atol=1e-14)
        assert p.w_y == pytest.approx(w_y, abs=1e-14)


class TestClosedForm:
    def test_ten_step_w_y(self):
        p = schedule_weights(SB_CFM, grid_for(SB_CFM, 10), "closed")
        assert p.w_y == pytest.approx(1e-4, rel=1e-12)
        assert sum(p.w) == pytest.approx(1 - 1e-4, rel=1e-12)

    def test_final_call_dominates(self):
        p = schedule_weights(SB_CFM, grid_for(SB_CFM, 10))
        assert p.w[0] == pytest.approx(0.96991649, abs=1e-8)
        assert sum(p.w[1:]) <= 0.031
        assert p.w[0] == max(p.w)

    @pytest.mark.parametrize("sched", [SB_CFM, SBVE, make_schedule("SB_GENERAL", c=0.3, k=2, f=-0.8)], ids=lambda s: s.kind.value)
    @pytest.mark.parametrize("n", [1, 2, 5, 10, 64])
    def test_closed_matches_recursion(self, sched, n):
        grid = grid_for(sched, n)
        a, b = schedule_weights(sched, grid, "closed"), schedule_weights(sched, grid, "recursion")
        np.testing.assert_allclose(a.w, b.w, rtol=1e-9, atol=1e-12)
        assert a.w_y == pytest.approx(b.w_y, rel=1e-9)

    def test_sum_identity_general_alpha(self):
        s = make_schedule("SB_GENERAL", c=0.3, k=2, f=0.5)
        p = schedule_weights(s, grid_for(s, 8))
        t0 = sb_terms(s, 1e-4)
        assert sum(p.w) == pytest.approx(t0.alpha * (1 - t0.rho_sq / t0.rho_sq_1), rel=1e-12)

    def test_truncated_grid_uses_last_point(self):
        grid = grid_for(SB_CFM, 5, tN=0.8)
        a = weights_closed_form_sb(grid, lambda t: 1.0, lambda t: t)
        b = schedule_weights(SB_CFM, grid, "recursion")
        assert a.w_y == pytest.approx(1e-4 / 0.8)
        assert sum(a.w) + a.w_y == pytest.approx(1.0)
        assert len(b.w) == 5

    def test_rho_zero(self):
        grid = grid_for(SB_CFM, 3, t0=1e-4)
        with pytest.raises(ValueError):
            weights_closed_form_sb(grid, lambda t: 1.0, lambda t: 0.0)

    def test_no_closed_form_for_ot(self):
        s = make_schedule("OT_CFM", sigma_min=0.05, sigma_max=0.5)
        with pytest.raises(ValueError):
            schedule_weights(s, grid_for(s, 3), "closed")


class TestCompose:
    def test_constant_predictions(self):
        p = schedule_weights(SB_CFM, grid_for(SB_CFM, 10))
        s, y = np.array([1.0, 2.0]), np.array([0.0, -1.0])
        np.testing.assert_allclose(compose_output(p, [s] * 10, y), (1 - 1e-4) * s + 1e-4 * y, atol=1e-12)

    def test_length_mismatch(self):
        p = schedule_weights(SB_CFM, grid_for(SB_CFM, 3))
        with pytest.raises(ValueError):
            compose_output(p, [np.zeros(2)] * 2, np.zeros(2))

    def test_recompose_trace(self):
        rng = np.random.default_rng(4)
        y = rng.standard_normal(5)
        pred = lambda x, yy, t: np.tanh(x) + t
        tr = sample(SBVE, y, pred, grid_for(SBVE, 7))
        np.testing.assert_allclose(recompose_trace(tr, y), tr.final, atol=1e-12)

    def test_csv(self):
        text = profile_to_csv(schedule_weights(SB_CFM, grid_for(SB_CFM, 10)))
        lines = text.split("\n")
        assert lines[0] == "step_index,t,weight"
        assert lines[-2] == "y,,0.0001"
        assert "\r" not in text and len(lines) == 13
