import math

import numpy as np
import pytest

from hypgraph.cone import eval_profile, solve_cone_profile
from hypgraph.supersolutions import (beta_exponent, certificate, certificate_large_mu,
                                     certificate_small_mu, coefficient_bounds, comparison_constants,
                                     eval_L, graded_grid, power_sine, profile_below_certificate,
                                     sandwich_slack)

FROZEN_BD = {0.3: (2.94600, 0.0062984), 0.5: (4.16023, 0.0074560)}


@pytest.fixture(scope="module")
def tables():
    return {mu: solve_cone_profile(mu) for mu in (0.25, 0.3, 0.5, 0.75)}


def test_small_opening_certificate():
    cert = certificate_small_mu(0.25)
    assert cert.A == pytest.approx(math.sqrt(0.75))
    assert cert.B == 0.0
    assert cert.max_L <= 0 and cert.fine_max <= 0


@pytest.mark.parametrize("mu, AB", [(0.5, (2.0, 2.0)), (0.75, (4.0, 4.0))])
def test_large_opening_certificate_constants(mu, AB):
    cert = certificate_large_mu(mu)
    assert (cert.A, cert.B) == AB
    assert cert.beta == pytest.approx(0.01)
    assert cert.max_L <= 0 and cert.fine_max <= 0


@pytest.mark.parametrize("mu", [0.25, 0.5, 0.75])
def test_profile_dominated_by_certificate(tables, mu):
    assert profile_below_certificate(tables[mu], certificate(mu)) >= 0


def test_beta_exponent_saturates():
    assert beta_exponent(0.5) == 0.01
    assert beta_exponent(0.99) == pytest.approx(0.5 * (1 / 0.99 - 1))


def test_power_sine_derivatives():
    mu, k = 0.6, 3.0
    th = np.linspace(0.2, 1.6, 9)
    eta = 1e-6
    phi, d1, d2 = power_sine(mu, k, th)
    fd1 = (power_sine(mu, k, th + eta)[0] - power_sine(mu, k, th - eta)[0]) / (2 * eta)
    fd2 = (power_sine(mu, k, th + eta)[1] - power_sine(mu, k, th - eta)[1]) / (2 * eta)
    np.testing.assert_allclose(d1, fd1, rtol=1e-6)
    np.testing.assert_allclose(d2, fd2, rtol=1e-6)


def test_profile_is_a_solution_of_L(tables):
    t = tables[0.5]
    from hypgraph.cone import eval_profile_derivative, eval_profile_second_derivative
    th = graded_grid(0.5, 200)
    vals = eval_L(0.5, eval_profile(t, th), eval_profile_derivative(t, th), eval_profile_second_derivative(t, th))
    assert np.max(np.abs(vals)) < 1e-9


def test_small_multiple_is_not_a_supersolution():
    # a flat multiple of phi_2 is not a supersolution once mu > 1/3
    from hypgraph.supersolutions import SupersolutionCertificate
    cert = SupersolutionCertificate(0.5, 2.0, 0.0, 0.1, 0.0, np.empty(0), np.empty(0), np.nan)
    assert np.max(cert.evaluate_L(graded_grid(0.5, 200))) > 0


@pytest.mark.parametrize("mu1", sorted(FROZEN_BD))
def test_comparison_constants_frozen(tables, mu1):
    cc = comparison_constants(tables[mu1])
    b, delta = FROZEN_BD[mu1]
    assert cc.b == pytest.approx(b, rel=2e-6)
    assert cc.delta == pytest.approx(delta, rel=1e-4)
    assert cc.delta == pytest.approx((math.sqrt(1 / (8 * cc.b) + 1) - 1) * mu1, rel=1e-14)


@pytest.mark.parametrize("mu1", sorted(FROZEN_BD))
def test_sandwich_and_coefficient_bounds(tables, mu1):
    t1 = tables[mu1]
    cc = comparison_constants(t1)
    mu2 = mu1 + 0.5 * cc.delta
    cc2 = comparison_constants(t1, mu2)
    t2 = solve_cone_profile(mu2)
    lower, upper = sandwich_slack(t1, t2, cc2.C)
    assert lower >= 0 and upper >= 0
    lo, hi = coefficient_bounds(mu1, mu2, t1.a_mu, cc2.C)
    assert lo * (1 - 1e-6) <= t2.a_mu <= hi * (1 + 1e-6)


def test_mu2_outside_window_rejected(tables):
    t1 = tables[0.3]
    with pytest.raises(ValueError, match="mu2 must lie"):
        comparison_constants(t1, 0.4)


def test_eval_L_validates_opening():
    with pytest.raises(ValueError):
        eval_L(1.2, np.ones(2), np.ones(2), np.ones(2))


def test_certificate_ranges():
    with pytest.raises(ValueError):
        certificate_small_mu(0.5)
    with pytest.raises(ValueError):
        certificate_large_mu(0.2)
    with pytest.raises(ValueError, match="alpha"):
        certificate_large_mu(0.5, alpha=1.5)

