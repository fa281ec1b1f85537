import math

import numpy as np
import pytest
from scipy import integrate, special

from bridgekit.special import expint_ei


def quad_ei(x):
    val, _ = integrate.quad(lambda v: math.exp(x * v) / v, 1.0, np.inf, epsabs=0.0, epsrel=1e-13, limit=400)
    return -val


@pytest.mark.parametrize("x, expected", [(-1.0, -0.2193839343955203), (-2.0, -0.04890051070806112)])
def test_reference_values(x, expected):
    assert expint_ei(x) == pytest.approx(quad_ei(x), rel=1e-12)
    assert expint_ei(x) == pytest.approx(expected, rel=1e-12)


def test_matches_scipy_on_grid():
    xs = -np.geomspace(1e-3, 20.0, 400)
    ours = np.array([expint_ei(float(x)) for x in xs])
    np.testing.assert_allclose(ours, special.expi(xs), rtol=1e-12)


def test_series_and_fraction_agree_near_switch():
    for x in (-3.999, -4.0, -4.001):
        assert expint_ei(x) == pytest.approx(special.expi(x), rel=1e-13)


def test_small_argument_log_behaviour():
    x = -1e-10
    assert expint_ei(x) == pytest.approx(np.euler_gamma + math.log(1e-10) + x, rel=1e-14)


def test_singular_at_zero():
    with pytest.raises(ValueError, match="singular argument"):
        expint_ei(0.0)


@pytest.mark.parametrize("x", [1.0, float("nan")])
def test_outside_domain(x):
    with pytest.raises(ValueError):
        expint_ei(x)
