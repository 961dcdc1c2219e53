import math

import numpy as np
import pytest
from scipy.interpolate import LinearNDInterpolator

from hypgraph import solver as S
from hypgraph.geometry import GeometryError, disk_domain, ellipse_domain, lens_domain, make_lens, tangent_cone
from hypgraph.model import build_lens_model, model_height
from hypgraph.verification import cone_ratio, match_nodes


@pytest.fixture(scope="module")
def disk32():
    return S.solve(disk_domain(1.0), S.SolverConfig(spacing=1 / 32))


def test_hemisphere_from_a_perturbed_start():
    dom = disk_domain(1.0)
    grid = S.build_grid(dom, 1 / 32)
    r2 = np.sum(grid.x**2, axis=1)
    exact = np.sqrt(1 - r2)
    guess = exact * (1 + 0.3 * grid.x[:, 0]) * 0.8
    fld = S.solve(dom, S.SolverConfig(spacing=1 / 32), grid=grid, guess=guess)
    assert fld.converged and fld.iterations > 1
    assert np.max(np.abs(fld.f - exact)) < 1e-8


def test_hemisphere_scales_with_radius():
    fld = S.solve(disk_domain(2.0, center=(0.3, -0.1)), S.SolverConfig(spacing=1 / 16))
    r2 = np.sum((fld.x - [0.3, -0.1]) ** 2, axis=1)
    assert np.max(np.abs(fld.f - np.sqrt(4 - r2))) < 1e-8


def test_residual_report(disk32):
    rep = S.pde_residual(disk32)
    assert rep["relative_max"] < 1e-10
    assert disk32.residual_history[-1] == disk32.residual


def test_boundary_slope_near_a_circle(disk32):
    # w / d -> 2R next to the boundary
    g = disk32.grid
    ratio = disk32.w[g.cut] / g.d[g.cut]
    np.testing.assert_allclose(ratio, 2.0, rtol=0.05)


def test_cut_nodes_touch_the_boundary(disk32):
    g = disk32.grid
    assert set(np.unique(g.classification())) == {"cut", "interior"}
    assert np.all(g.d[g.cut] <= math.sqrt(2) / 32 + 1e-12)
    assert np.all(g.arms[g.neighbors < 0] <= 1.0)


def test_coarse_spacing_rejected():
    with pytest.raises(GeometryError, match="too coarse"):
        S.build_grid(disk_domain(0.05), 0.01)


@pytest.mark.parametrize("kw", [{"spacing": 0.0}, {"tol": -1.0}, {"eps_decay": 1.5}, {"m": 0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        S.SolverConfig(**kw)


def test_newton_failure_carries_diagnostics():
    with pytest.raises(S.SolverError) as exc:
        S.solve(lens_domain(0.5, 1.0, 1.0), S.SolverConfig(spacing=1 / 32, tol=1e-16, max_iter=3))
    assert exc.value.residual > 1e-16
    assert len(exc.value.diagnostics["residual_history"]) == 4


def test_shifted_lattice_same_accuracy():
    dom = disk_domain(1.0)
    fld = S.solve(dom, S.SolverConfig(spacing=1 / 32, shift=(1 / 3, 1 / 3)))
    exact = np.sqrt(1 - np.sum(fld.x**2, axis=1))
    assert np.max(np.abs(fld.f - exact)) < 1e-8


def test_lens_grids_are_nested_under_refinement():
    dom = lens_domain(0.5, 1.0, 1.0)
    for shift in (0.0, 1 / 3):
        coarse = S.build_lens_grid(dom, 0.04, 20, shift=shift)
        fine = S.build_lens_grid(dom, 0.02, 40, shift=2 * shift)
        # the fixed end rows sit at r_min on both lattices and are not shared
        idx = match_nodes(coarse.x[~coarse.fixed], fine.x)
        assert np.all(idx >= 0)


def test_bipolar_lens_solve_matches_model():
    lens = make_lens(0.5, 1.0, 1.0)
    dom = lens.domain()
    fld = S.solve_lens(dom, 0.04, 40)
    g = fld.grid
    sel = ~g.fixed & (g.d > 0.02)
    ref = model_height(build_lens_model(lens), g.x[sel])
    assert np.max(np.abs(fld.f[sel] / ref - 1)) < 5e-3


def test_elliptic_grid_agrees_with_cartesian():
    dom = ellipse_domain(1.0, 0.5)
    ell = S.solve_ellipse(dom, 80, 40)
    cart = S.solve(dom, S.SolverConfig(spacing=1 / 64))
    interp = LinearNDInterpolator(cart.x, cart.f)
    sel = ell.grid.d > 0.1
    diff = np.abs(interp(ell.grid.x[sel]) - ell.f[sel])
    assert np.nanmax(diff) < 2e-3


def test_elliptic_grid_rejects_circles_and_odd_rows():
    with pytest.raises(GeometryError, match="circle"):
        S.build_ellipse_grid(ellipse_domain(1.0, 1.0), 40, 20)
    with pytest.raises(ValueError, match="even"):
        S.build_ellipse_grid(ellipse_domain(1.0, 0.5), 40, 21)
    with pytest.raises(GeometryError, match="single ellipse"):
        S.build_ellipse_grid(disk_domain(1.0), 40, 20)


def test_elliptic_wrap_is_an_involution():
    m = S.EllipticMap((0.0, 0.0), 0.0, 0.8, 0.5, 10, 8)
    i = np.array([-1, -2, 10, 11])
    j = np.array([1, 3, 2, 5])
    wi, wj = m.wrap(i, j)
    assert np.all((wi >= 0) & (wi < 10))
    # wrapped nodes are the same physical points
    np.testing.assert_allclose(m.point(wi, wj), m.point(i, j), atol=1e-12)


def test_corner_grid_solution_converges_to_the_cone():
    # the ungraded log-polar lattice is first order next to the arcs, so
    # the check uses the middle of the opening and a refinement pair
    dom = lens_domain(0.5, 1.0, 1.0)
    c = dom.corners[0]
    table = S.cone_table(0.5)
    errs = []
    for d_rho, n_theta in ((0.04, 40), (0.02, 80)):
        fld = S.solve_corner(dom, c, d_rho, n_theta)
        r, th = tangent_cone(c).polar(fld.x)
        sel = ~fld.grid.fixed & (r > 1e-5) & (r < 1e-3) & (th > 0.25 * table.width) & (th < 0.75 * table.width)
        errs.append(np.max(np.abs(cone_ratio(c, table, fld.x[sel], fld.f[sel]) - 1)))
    assert errs[0] < 0.02
    assert errs[1] < 0.6 * errs[0]


def test_with_f_round_trip(disk32):
    g = disk32.with_f(disk32.f)
    np.testing.assert_allclose(g.u, disk32.u, rtol=1e-14)
    assert np.isfinite(S.energy(disk32))
