import math

import numpy as np
import pytest

from hypgraph.cone import eval_profile, solve_cone_profile
from hypgraph.geometry import make_lens, tangent_cone
from hypgraph.model import (ModelError, build_lens_model, model_height, model_height_from_distances,
                            model_residual)


@pytest.fixture(scope="module")
def sym():
    return build_lens_model(make_lens(0.5, 1.0, 1.0))


def _inside(lens, n, seed=0):
    rng = np.random.default_rng(seed)
    p = rng.uniform([0.0, -0.5], [1.5, 0.5], size=(4 * n, 2))
    d1, d2 = lens.distances(p)
    return p[(d1 > 1e-3) & (d2 > 1e-3)][:n]


def test_boundary_images_are_the_cone_rays(sym):
    a1, a2 = sym.image_ray_angles()
    np.testing.assert_allclose(a1, sym.edge_angle, atol=1e-12)
    np.testing.assert_allclose(a2, sym.edge_angle + 0.5 * math.pi, atol=1e-12)


def test_height_solves_the_crossing_equation(sym):
    p = _inside(sym.lens, 200)
    t = model_height(sym, p)
    assert np.all(t > 0)
    assert np.max(model_residual(sym, p, t)) < 1e-12


def test_symmetric_lens_gives_symmetric_heights(sym):
    p = _inside(sym.lens, 50, seed=1)
    np.testing.assert_allclose(model_height(sym, p), model_height(sym, p * [1, -1]), rtol=1e-11)


def test_cone_law_at_the_vertex(sym):
    c = sym.lens.corner()
    th = np.linspace(0.2, 1.3, 5)
    cone = tangent_cone(c)
    e1 = cone.edge1
    e2 = np.array([-e1[1], e1[0]])
    for r in (1e-4, 1e-6):
        p = r * (np.cos(th)[:, None] * e1 + np.sin(th)[:, None] * e2)
        ratio = model_height(sym, p) / (r * eval_profile(sym.table, th))
        np.testing.assert_allclose(ratio, 1.0, atol=5 * r)


def test_height_below_both_hemispheres(sym):
    p = _inside(sym.lens, 300, seed=2)
    d1, d2 = sym.lens.distances(p)
    cap = np.minimum(np.sqrt(d1 * (2 - d1)), np.sqrt(d2 * (2 - d2)))
    assert np.all(model_height(sym, p) <= cap)


def test_dilation_scales_heights():
    small = build_lens_model(make_lens(0.5, 1.0, 1.0))
    big = build_lens_model(make_lens(0.5, 0.5, 0.5))
    p = _inside(small.lens, 40, seed=3)
    np.testing.assert_allclose(model_height(big, 2 * p), 2 * model_height(small, p), rtol=1e-10)


def test_asymmetric_lens_residual():
    model = build_lens_model(make_lens(0.4, 1.5, 0.8, vertex=(0.2, 0.1), bisector_angle=0.7))
    x0 = np.asarray(model.lens.vertex)
    q = np.asarray(model.lens.far_vertex)
    p = x0 + np.linspace(0.05, 0.95, 9)[:, None] * (q - x0)
    t = model_height(model, p)
    assert np.all(t > 0)
    assert np.max(model_residual(model, p, t)) < 1e-12


def test_from_distances_agrees(sym):
    d = np.array([0.01, 0.02])
    t = model_height_from_distances(sym, d, d[::-1])
    assert t[0] == pytest.approx(t[1], rel=1e-12)


def test_outside_point_rejected(sym):
    with pytest.raises(ModelError, match="inside"):
        model_height(sym, np.array([[-0.1, 0.0]]))


def test_table_must_match_opening():
    with pytest.raises(ModelError, match="opening"):
        build_lens_model(make_lens(0.5, 1.0, 1.0), table=solve_cone_profile(0.4))
