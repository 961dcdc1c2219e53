import json
import math

import numpy as np
import pytest

from hypgraph.geometry import (CornerData, GeometryError, capped_lens_domain, circle_intersections,
                               corner_chart, disk_domain, domain_from_dict, ellipse_arc, ellipse_domain,
                               lens_domain, load_domain, make_lens, perturbed_lens_domain,
                               point_from_distances, points_from_distances, polynomial_arc, tangent_cone)
from hypgraph.verification import locally_identical

from oracles import brute_force_distance, two_circle_intersections


def test_circle_intersections_match_complex_oracle():
    c1, r1, c2, r2 = (0.3, -0.2), 1.1, (1.0, 0.4), 0.8
    pa, pb, ok = circle_intersections(c1, r1, c2, r2)
    za, zb = two_circle_intersections(c1, r1, c2, r2)
    got = sorted([tuple(pa), tuple(pb)])
    want = sorted([(za.real, za.imag), (zb.real, zb.imag)])
    assert ok
    np.testing.assert_allclose(got, want, atol=1e-14)


def test_lens_vertices_lie_on_both_circles():
    lens = make_lens(0.4, 1.3, 0.7, vertex=(0.2, -0.1), bisector_angle=0.6)
    for v in (lens.vertex, lens.far_vertex):
        d1, d2 = lens.distances(np.array([v]))
        assert abs(d1[0]) < 1e-12 and abs(d2[0]) < 1e-12


def test_lens_domain_detects_both_corners():
    dom = lens_domain(0.5, 1.0, 1.0)
    assert len(dom.corners) == 2
    c = dom.corners[0]
    assert c.vertex == pytest.approx((0.0, 0.0), abs=1e-15)
    assert c.mu == pytest.approx(0.5, abs=1e-12)
    assert c.kappa1 == pytest.approx(1.0) and c.kappa2 == pytest.approx(1.0)


def test_corner_rejects_inconsistent_opening():
    with pytest.raises(GeometryError, match="opening"):
        CornerData((0, 0), 0.3, (0.0, 1.0), (0.0, -1.0), 1.0, 1.0)
    with pytest.raises(GeometryError):
        CornerData((0, 0), 1.2, (0.0, 1.0), (0.0, -1.0), 1.0, 1.0)


def test_ellipse_distance_matches_brute_force():
    arc = ellipse_arc((0.1, 0.0), (1.0, 0.5), 0.3, 0.0, 2 * math.pi)
    s = np.linspace(0, 2 * math.pi, 400_001)
    rng = np.random.default_rng(1)
    t = rng.uniform(0, 2 * math.pi, 20)
    depth = rng.uniform(0.0, 0.2, 20)  # inside the tube of radius b^2/a = 0.25
    pts = arc.point(t) + depth[:, None] * arc.inward_normal(t)
    d = arc.signed_distance(pts)
    for p, dp in zip(pts, d):
        assert dp == pytest.approx(brute_force_distance(arc.point, p, s), abs=1e-9)


def test_ellipse_distance_refuses_points_beyond_the_tube():
    arc = ellipse_arc((0.0, 0.0), (1.0, 0.5), 0.0, 0.0, 2 * math.pi)
    with pytest.raises(GeometryError, match="tubular"):
        arc.signed_distance(np.array([[0.0, 0.0]]))


def test_disk_curvature_at_foot_point():
    dom = disk_domain(2.0)
    H = dom.boundary_curvature_at_foot(np.array([[0.3, 0.1], [-1.5, 0.2]]))
    np.testing.assert_allclose(H, 0.5, rtol=1e-12)


def test_ellipse_vertex_curvatures():
    dom = ellipse_domain(1.0, 0.5)
    H = dom.boundary_curvature_at_foot(np.array([[0.9, 0.0], [0.0, 0.45]]))
    np.testing.assert_allclose(H, [1.0 / 0.25, 0.5], rtol=1e-9)


def test_points_from_distances_round_trip():
    lens = make_lens(0.5, 1.0, 2.0)
    rng = np.random.default_rng(0)
    d1, d2 = rng.uniform(1e-4, 0.05, 50), rng.uniform(1e-4, 0.05, 50)
    pts, ok = points_from_distances(lens, d1, d2)
    assert np.all(ok)
    e1, e2 = lens.distances(pts)
    np.testing.assert_allclose(e1, d1, atol=1e-13)
    np.testing.assert_allclose(e2, d2, atol=1e-13)


def test_point_from_distances_outside_chart():
    lens = make_lens(0.5, 1.0, 1.0)
    with pytest.raises(GeometryError, match="chart radius"):
        point_from_distances(lens, 0.5, 0.5)


def test_corner_chart_is_identity_on_the_lens():
    lens = make_lens(0.5, 1.0, 1.0)
    dom = lens.domain()
    p = np.array([[0.05, 0.01], [0.1, -0.02]])
    np.testing.assert_allclose(corner_chart(dom, dom.corners[0], p), p, atol=1e-13)


def test_tangent_cone_contains_lens_points():
    dom = lens_domain(0.5, 1.0, 1.0)
    cone = tangent_cone(dom.corners[0])
    assert np.all(cone.contains(np.array([[0.1, 0.0], [0.5, 0.3]])))
    assert not np.any(cone.contains(np.array([[-0.1, 0.0], [0.1, 0.2]])))


def test_perturbed_lens_keeps_corner_data():
    a = lens_domain(0.5, 1.0, 1.0).corners[0]
    b = perturbed_lens_domain(0.5, 1.0, 1.0).corners[0]
    np.testing.assert_allclose(b.vertex, a.vertex, atol=1e-12)
    assert b.mu == pytest.approx(a.mu, abs=1e-9)
    assert b.kappa1 == pytest.approx(1.0, rel=1e-9)
    np.testing.assert_allclose(b.nu1, a.nu1, atol=1e-9)


def test_capped_lens_agrees_near_the_vertex():
    dom = lens_domain(0.5, 1.0, 1.0)
    capped = capped_lens_domain(0.5, 1.0, 1.0)
    assert locally_identical(dom, capped, (0.0, 0.0), 0.35) == 0.0
    assert locally_identical(dom, capped, dom.corners[1].vertex, 0.1) > 0.0


def test_scaling_divides_curvatures():
    dom = lens_domain(0.5, 1.0, 1.0).scaled(2.0)
    c = dom.corners[0]
    assert c.kappa1 == pytest.approx(0.5) and c.kappa2 == pytest.approx(0.5)
    assert dom.diameter() == pytest.approx(2 * math.sqrt(2), rel=1e-3)


def test_domain_json_round_trip(tmp_path):
    dom = perturbed_lens_domain(0.5, 1.0, 1.0)
    path = tmp_path / "d.json"
    path.write_text(json.dumps(dom.to_dict()))
    back = load_domain(path)
    rng = np.random.default_rng(2)
    pts = rng.uniform([0, -0.5], [1.4, 0.5], size=(200, 2))
    np.testing.assert_allclose(back.signed_distance(pts), dom.signed_distance(pts), atol=1e-14)


def test_open_boundary_is_rejected():
    d = disk_domain(1.0).to_dict()
    d["arcs"][0]["angle_end"] = 2.0
    with pytest.raises(GeometryError, match="not closed"):
        domain_from_dict(d)


def test_parabola_distance_on_the_axis():
    # y = x^2/2 has curvature radius 1 at its vertex, so (0, t) keeps its
    # foot point at the origin for t < 1 and the distance is exactly t
    arc = polynomial_arc([0.0, 0.0, 0.5], -1.0, 1.0)
    s = np.linspace(arc.s_start, arc.s_end, 20001)
    for t in (0.01, 0.1, 0.4):
        d = float(arc.signed_distance(np.array([[0.0, t]]))[0])
        assert d == pytest.approx(t, abs=1e-12)
        assert d == pytest.approx(brute_force_distance(arc.point, (0.0, t), s), abs=1e-9)
