import json

import numpy as np
import pytest

from hypgraph import solver as S
from hypgraph import verification as V
from hypgraph.geometry import GeometryError, capped_lens_domain, disk_domain, lens_domain


@pytest.fixture(scope="module")
def disk_pair():
    h = 1 / 32
    f1 = S.solve(disk_domain(1.0), S.SolverConfig(spacing=h))
    f2 = S.solve(disk_domain(2.0), S.SolverConfig(spacing=2 * h))
    outer = S.solve(disk_domain(2.0), S.SolverConfig(spacing=h))
    return f1, f2, outer


def _peak(fld):
    free = np.nonzero(~fld.grid.fixed)[0]
    return int(free[np.argmax(fld.f[free])])


def test_fit_exponent_recovers_power_law():
    r = 0.5 ** np.arange(6)
    slope, resid = V.fit_exponent(r, 3 * r**1.7)
    assert slope == pytest.approx(1.7, abs=1e-12)
    assert resid < 1e-12


def test_dyadic_sups_assign_bands_and_drop_starved_ones():
    rng = np.random.default_rng(0)
    radius = rng.uniform(0.01, 1.0, 20000)
    radii, sups, counts = V.dyadic_sups(radius, radius, 1.0, levels=8, min_nodes=50)
    assert np.all(sups <= radii) and np.all(sups > radii / 2)
    assert radii[-1] > 0.01  # the band below 0.0156 has too few samples
    assert np.all(counts >= 50)


def test_decay_verdict_cases():
    r = 0.5 ** np.arange(5)
    ok = V.decay_verdict("t", r, r**2, np.full(5, 100))
    assert ok.passed and ok.exponent == pytest.approx(2.0)
    bump = V.decay_verdict("t", r, np.array([1.0, 0.5, 0.6, 0.2, 0.1]), np.full(5, 100))
    assert not bump.passed and "between levels 1 and 2" in bump.message
    floor = V.decay_verdict("t", r, r**2, np.full(5, 100), floor=np.full(5, 0.02))
    assert not floor.passed and floor.levels_used == 3
    slow = V.decay_verdict("t", r, r**0.2, np.full(5, 100), min_exponent=0.4)
    assert not slow.passed and "below" in slow.message


def test_report_validates_and_serializes():
    with pytest.raises(V.VerificationError, match="decreasing"):
        V.AsymptoticsReport("t", [0.1, 0.2], [1, 1], [1, 1], 0.0, 0.0, True, "")
    with pytest.raises(V.VerificationError, match="nonnegative"):
        V.AsymptoticsReport("t", [0.2, 0.1], [1, -1], [1, 1], 0.0, 0.0, True, "")
    rep = V.decay_verdict("t", np.array([0.2, 0.1]), np.array([0.4, 0.1]), np.array([60, 70]), min_levels=2)
    json.dumps(rep.to_dict())
    assert rep.rows()[0][:4] == (0, 0.2, 0.4, 60)


def test_richardson_removes_second_order_error():
    xs = np.linspace(0, 1, 11)
    coarse = V.Samples(np.column_stack([xs, 0 * xs]), np.sin(xs) + 4e-2 * xs**2, xs, 0.1 + 0 * xs)
    xf = np.linspace(0, 1, 21)
    fine = V.Samples(np.column_stack([xf, 0 * xf]), np.sin(xf) + 1e-2 * xf**2, xf, 0.05 + 0 * xf)
    out = V.richardson(coarse, fine)
    np.testing.assert_allclose(out.f, np.sin(xs), atol=1e-15)


def test_match_nodes_tolerance():
    a = np.array([[0.0, 0.0], [0.5, 0.5], [0.3, 0.1]])
    b = np.array([[0.5, 0.5 + 1e-14], [0.0, 0.0]])
    np.testing.assert_array_equal(V.match_nodes(a, b), [1, 0, -1])


def test_smooth_expansion_on_the_disk():
    f1 = S.solve(disk_domain(1.0), S.SolverConfig(spacing=1 / 64))
    rep = V.check_smooth_expansion(disk_domain(1.0), f1, reference=lambda x, d: 1 - np.sqrt(1 - d / 2))
    assert rep.passed
    np.testing.assert_allclose(rep.sups, rep.reference, atol=1e-8)
    assert rep.exponent == pytest.approx(1.0, abs=0.1)


def test_smooth_expansion_needs_a_smooth_domain():
    with pytest.raises(V.VerificationError, match="without corners"):
        V.check_smooth_expansion(lens_domain(0.5, 1.0, 1.0), None)


def test_localization_identical_and_mismatched_domains():
    dom = lens_domain(0.5, 1.0, 1.0)
    fld = S.solve_corner(dom, dom.corners[0], 0.04, 40)
    same = V.check_localization(dom, dom, dom.corners[0], fld, fld)
    assert same.passed and np.all(same.sups == 0)
    other = lens_domain(0.5, 1.2, 1.0)
    with pytest.raises(GeometryError, match="differ near the corner"):
        V.check_localization(dom, other, dom.corners[0], fld, fld)
    assert V.locally_identical(dom, capped_lens_domain(0.5, 1.0, 1.0), (0, 0), 0.3) == 0.0


def test_cone_growth_needs_matching_table():
    dom = lens_domain(0.5, 1.0, 1.0)
    with pytest.raises(V.VerificationError, match="opening"):
        V.check_cone_growth(None, dom.corners[0], S.cone_table(0.4))


def test_corner_estimate_guards():
    dom = lens_domain(0.5, 1.0, 1.0)
    c = dom.corners[0]
    fld = S.solve(dom, S.SolverConfig(spacing=1 / 32))
    with pytest.raises(V.VerificationError, match="chart radius"):
        V.check_corner_estimate(dom, c, fld, r0=1.0)
    with pytest.raises(V.VerificationError, match="smallest usable radius"):
        V.check_corner_estimate(dom, c, fld)


def test_default_r0_is_half_the_chart_radius():
    c = lens_domain(0.5, 1.0, 1.0).corners[0]
    assert V.default_r0(c) == pytest.approx(0.5 * np.sin(np.pi / 4) / 2)


def test_properties_pass_on_the_disk_pair(disk_pair):
    f1, f2, outer = disk_pair
    results = V.property_suite(f1, outer=outer, scaled=f2)
    assert [r.name for r in results] == ["holder", "concavity", "inclusion", "scaling"]
    assert all(r.passed for r in results)
    json.dumps([r.to_dict() for r in results])


def test_raised_node_breaks_concavity_at_that_node(disk_pair):
    f1 = disk_pair[0]
    node = int(np.argmin(np.sum((f1.x - [0.5, 0.1]) ** 2, axis=1)))
    res = V.concavity_property(V.with_defect(f1, node, 1.1))
    assert not res.passed
    assert node in [w["node"] for w in res.witness]


def test_dimpled_peak_breaks_concavity(disk_pair):
    f1 = disk_pair[0]
    assert not V.concavity_property(V.with_defect(f1, _peak(f1), 0.9)).passed


def test_spike_breaks_holder(disk_pair):
    f1 = disk_pair[0]
    diam = 2.0
    C = (3 * diam**2) ** (1 / 3)
    spike = 2 * C * diam ** (1 / 3) * (1 + 5 * (1 / 32) ** (1 / 3))
    assert not V.holder_property(V.with_defect(f1, _peak(f1), add=spike), diam).passed


def test_lifted_node_breaks_inclusion(disk_pair):
    f1, _, outer = disk_pair
    node = _peak(f1)
    above = outer.f.max() - f1.f[node] + 0.01
    res = V.inclusion_property(V.with_defect(f1, node, add=above), outer)
    assert not res.passed


def test_scaled_node_breaks_scaling(disk_pair):
    f1, f2, _ = disk_pair
    assert not V.scaling_property(V.with_defect(f1, _peak(f1), 1.1), f2, 2.0).passed


def test_with_defect_leaves_the_original_alone(disk_pair):
    f1 = disk_pair[0]
    before = f1.f.copy()
    V.with_defect(f1, 0, 2.0)
    np.testing.assert_array_equal(f1.f, before)


def test_cone_domination_on_the_lens():
    dom = lens_domain(0.5, 1.0, 1.0)
    fld = S.solve(dom, S.SolverConfig(spacing=1 / 32))
    res = V.cone_domination_property(fld, dom.corners[0], S.cone_table(0.5))
    assert res.passed
