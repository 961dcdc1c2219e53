import math

import numpy as np
import pytest

from hypgraph.cone import (ConeSolverError, a_mu, eval_cone_solution, eval_profile, eval_profile_derivative,
                           eval_profile_second_derivative, ode_terms, profile_operator, relative_residual,
                           solve_cone_profile)

from oracles import collocation_cone_coefficient

# corner coefficients frozen from the collocation oracle (n = 100000) and the shooting solver
FROZEN_A = {0.25: 0.87247528, 0.5: 0.2454299467, 0.75: 0.09045876098}


@pytest.fixture(scope="module")
def tables():
    return {mu: solve_cone_profile(mu) for mu in FROZEN_A}


@pytest.mark.parametrize("mu", sorted(FROZEN_A))
def test_corner_coefficient_frozen(tables, mu):
    assert a_mu(tables[mu]) == pytest.approx(FROZEN_A[mu], rel=1e-7)


@pytest.mark.parametrize("mu", [0.25, 0.4, 0.5, 0.7, 0.75])
def test_corner_coefficient_matches_collocation_oracle(mu):
    # the O(n^-2) collocation error at n = 20000 is a few parts in 10^6
    a_ref, mid_ref = collocation_cone_coefficient(mu, n=20_000)
    table = solve_cone_profile(mu)
    assert table.a_mu == pytest.approx(a_ref, rel=2e-5)
    assert table.midpoint == pytest.approx(mid_ref, rel=1e-6)


@pytest.mark.parametrize("mu", sorted(FROZEN_A))
def test_residual_and_symmetry(tables, mu):
    t = tables[mu]
    assert t.residual < 1e-8
    assert t.symmetry_defect < 1e-8


def test_profile_equation_holds_on_the_table(tables):
    t = tables[0.5]
    th = np.linspace(0.01, t.width - 0.01, 200)
    h = eval_profile(t, th)
    hp = eval_profile_derivative(t, th)
    hpp = eval_profile_second_derivative(t, th)
    assert np.max(np.abs(profile_operator(h, hp, hpp))) < 1e-10 * np.max(np.abs(ode_terms(h, hp, hpp)))
    # h'' taken from the equation must agree with a finite difference of h'
    eta = 1e-5
    fd = (eval_profile_derivative(t, th + eta) - eval_profile_derivative(t, th - eta)) / (2 * eta)
    np.testing.assert_allclose(fd, hpp, rtol=1e-5)


def test_endpoint_law(tables):
    t = tables[0.5]
    th = np.array([1e-9, 1e-8])
    np.testing.assert_allclose(eval_profile(t, th), (th / t.a_mu) ** (1 / 3), rtol=1e-4)


def test_concavity_consequence(tables):
    t = tables[0.75]
    th = np.linspace(1e-4, t.width - 1e-4, 500)
    assert np.all(eval_profile_second_derivative(t, th) + eval_profile(t, th) < 0)


def test_symmetric_about_midpoint(tables):
    t = tables[0.25]
    th = np.linspace(0.01, 0.5 * t.width, 50)
    np.testing.assert_allclose(eval_profile(t, th), eval_profile(t, t.width - th), rtol=1e-9)
    assert float(eval_profile(t, 0.5 * t.width)) == pytest.approx(t.midpoint, rel=1e-12)


def test_cone_solution_is_homogeneous(tables):
    t = tables[0.5]
    assert float(eval_cone_solution(t, 3.0, 0.4)) == pytest.approx(3 * float(eval_cone_solution(t, 1.0, 0.4)))
    assert float(eval_cone_solution(t, 0.0, 0.4)) == 0.0
    with pytest.raises(ValueError):
        eval_cone_solution(t, -1.0, 0.4)


def test_coefficient_stable_under_refinement():
    coarse = solve_cone_profile(0.5, tol=1e-8, n_grid=800)
    fine = solve_cone_profile(0.5, tol=1e-10, n_grid=3000)
    assert abs(coarse.a_mu - fine.a_mu) <= 1e-3 * fine.a_mu


def test_coefficient_decreases_with_opening(tables):
    a = [tables[mu].a_mu for mu in sorted(FROZEN_A)]
    assert a[0] > a[1] > a[2]


def test_outside_opening_raises(tables):
    t = tables[0.5]
    with pytest.raises(ValueError, match="theta outside"):
        eval_profile(t, np.array([t.width + 0.1]))


@pytest.mark.parametrize("mu", [0.0, 1.0, -0.2, 1.5])
def test_invalid_opening(mu):
    with pytest.raises(ValueError, match="mu"):
        solve_cone_profile(mu)


def test_a_mu_rejects_disagreeing_estimates(tables):
    t = tables[0.5]
    from dataclasses import replace
    bad = replace(t, a_mu_fit=t.a_mu * 1.1)
    with pytest.raises(ConeSolverError, match="disagree"):
        a_mu(bad)


def test_relative_residual_is_scale_free():
    h, hp, hpp = np.array([0.5]), np.array([0.1]), np.array([-3.0])
    r = relative_residual(h, hp, hpp)
    assert 0 <= r[0] <= 1
    assert math.isclose(r[0], abs(profile_operator(h, hp, hpp)[0]) / np.abs(ode_terms(h, hp, hpp)).sum())
