"""Dyadic-annulus checks of boundary and corner asymptotics, plus property checks.

Each asymptotic check samples a deviation on a solved field, takes its sup
over dyadic bands r_k = r0 2^{-k} (in distance to a corner, or in distance to
the boundary for smooth domains), fits the decay exponent by least squares in
log-log coordinates and asserts monotone decay over the levels that sit above
a discretization floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .cone import ConeSolutionTable, eval_profile
from .geometry import (ConvexCornerDomain, CornerData, GeometryError, LensDomain,
                       corner_chart_many, tangent_cone)
from .model import LensModel, build_lens_model, model_height
from .solver import ScalarField, solve_lens

LEVELS = 5
MIN_NODES = 50
MIN_FIT_LEVELS = 4
MATCH_RTOL = 1e-12


class VerificationError(ValueError):
    pass


# --------------------------------------------------------------------------
# samples


@dataclass(frozen=True, eq=False)
class Samples:
    """Free nodes of a solved field: positions, values, distances, local spacing."""

    x: np.ndarray
    f: np.ndarray
    d: np.ndarray
    spacing: np.ndarray
    label: str = ""

    def __len__(self) -> int:
        return len(self.f)

    def subset(self, mask) -> "Samples":
        return Samples(self.x[mask], self.f[mask], self.d[mask], self.spacing[mask], self.label)

    def away_from_boundary(self, factor: float = 5.0) -> "Samples":
        return self.subset(self.d > factor * self.spacing)


def samples(fld: ScalarField | Samples, label: str = "") -> Samples:
    if isinstance(fld, Samples):
        return fld
    g = fld.grid
    free = ~g.fixed
    return Samples(g.x[free], fld.f[free], g.d[free], g.spacing[free], label)


def match_nodes(x_from, x_to, rtol: float = MATCH_RTOL):
    """Indices into x_to of the points coinciding with x_from (-1 where none)."""
    x_to = np.asarray(x_to, float)
    scale = max(1.0, float(np.max(np.abs(x_to))))
    dist, idx = cKDTree(x_to).query(np.asarray(x_from, float))
    return np.where(dist <= rtol * scale, idx, -1)


def richardson(coarse, fine, order: int = 2, label: str = "richardson") -> Samples:
    """(2^p f_fine - f_coarse) / (2^p - 1) on coarse nodes that the fine lattice contains."""
    c, f = samples(coarse), samples(fine)
    idx = match_nodes(c.x, f.x)
    hit = idx >= 0
    if not np.any(hit):
        raise VerificationError("the two lattices share no nodes")
    w = 2.0**order
    vals = (w * f.f[idx[hit]] - c.f[hit]) / (w - 1)
    return Samples(c.x[hit], vals, c.d[hit], c.spacing[hit], label)


def lens_samples(domain: ConvexCornerDomain, d_tau: float = 0.04, n_sigma: int = 40,
                 extrapolate: bool = True, shift: float = 0.0, tol: float = 1e-10) -> Samples:
    """Bipolar-lattice solve of a two-corner domain, Richardson-extrapolated by default."""
    coarse = solve_lens(domain, d_tau, n_sigma, tol=tol, shift=shift)
    if not extrapolate:
        return samples(coarse, "bipolar")
    fine = solve_lens(domain, d_tau / 2, 2 * n_sigma, tol=tol, shift=2 * shift)
    return richardson(coarse, fine)


# --------------------------------------------------------------------------
# reports


@dataclass
class AsymptoticsReport:
    """Per-level sups of a deviation, the fitted decay exponent and the verdict.

    ``radii`` are the outer edges r_k of the bands (r_k/2, r_k].  ``floor``
    holds the discretization floor on the same levels (NaN where unknown) and
    ``used`` marks the levels that entered the decay assertion and the fit.
    """

    case: str
    radii: np.ndarray
    sups: np.ndarray
    counts: np.ndarray
    exponent: float
    fit_residual: float
    passed: bool
    message: str
    floor: np.ndarray | None = None
    used: np.ndarray | None = None
    reference: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.radii = np.asarray(self.radii, float)
        self.sups = np.asarray(self.sups, float)
        self.counts = np.asarray(self.counts, int)
        if np.any(np.diff(self.radii) >= 0):
            raise VerificationError("band radii must be strictly decreasing")
        if np.any(self.sups < 0):
            raise VerificationError("deviation sups must be nonnegative")
        if self.used is None:
            self.used = np.ones(len(self.radii), bool)

    @property
    def levels_used(self) -> int:
        return int(np.sum(self.used))

    def to_dict(self) -> dict:
        def arr(a):
            return None if a is None else [float(v) for v in a]
        return {
            "case": self.case, "passed": bool(self.passed), "message": self.message,
            "exponent": float(self.exponent), "fit_residual": float(self.fit_residual),
            "levels_used": self.levels_used, "radii": arr(self.radii), "sups": arr(self.sups),
            "counts": [int(c) for c in self.counts], "floor": arr(self.floor),
            "used": [bool(u) for u in self.used], "reference": arr(self.reference),
            "metadata": self.metadata,
        }

    def rows(self):
        """Per-level table: level, outer radius, sup, count, floor, used, reference."""
        nan = np.full(len(self.radii), np.nan)
        floor = nan if self.floor is None else self.floor
        ref = nan if self.reference is None else self.reference
        return [(k, self.radii[k], self.sups[k], int(self.counts[k]), floor[k], bool(self.used[k]), ref[k])
                for k in range(len(self.radii))]


def fit_exponent(radii, sups):
    """OLS slope of log sup against log r, with the RMS residual of the fit."""
    r = np.asarray(radii, float)
    s = np.asarray(sups, float)
    ok = (s > 0) & (r > 0)
    if np.sum(ok) < 2:
        return math.nan, math.nan
    X, Y = np.log(r[ok]), np.log(s[ok])
    slope, icpt = np.polyfit(X, Y, 1)
    return float(slope), float(np.sqrt(np.mean((Y - slope * X - icpt) ** 2)))


def dyadic_sups(radius, deviation, r0: float, levels: int = LEVELS, min_nodes: int = MIN_NODES):
    """Sup of the deviation over each band (r0 2^{-k-1}, r0 2^{-k}]; starved bands dropped."""
    radius = np.asarray(radius, float)
    deviation = np.asarray(deviation, float)
    radii, sups, counts = [], [], []
    for k in range(levels):
        hi = r0 * 2.0**-k
        m = (radius > hi / 2) & (radius <= hi)
        n = int(np.sum(m))
        if n >= min_nodes:
            radii.append(hi)
            sups.append(float(np.max(deviation[m])))
            counts.append(n)
    return np.array(radii), np.array(sups), np.array(counts, int)


def decay_verdict(case, radii, sups, counts, floor=None, min_levels: int = MIN_FIT_LEVELS,
                  reference=None, metadata=None, min_exponent: float | None = None):
    """Assert monotone decay over the leading levels that lie strictly above the floor."""
    floor_arr = None if floor is None else np.asarray(floor, float)
    above = np.ones(len(sups), bool) if floor_arr is None else ~(sups <= floor_arr)
    # the run of levels above the floor, from the outermost band inward
    n_above = int(np.argmin(above)) if not np.all(above) else len(sups)
    used = np.zeros(len(sups), bool)
    used[:n_above] = True
    slope, resid = fit_exponent(radii[used], sups[used]) if n_above >= 2 else (math.nan, math.nan)
    if n_above < min_levels:
        ok, msg = False, f"only {n_above} levels above the floor (need {min_levels})"
    elif np.any(np.diff(sups[used]) >= 0):
        k = int(np.argmax(np.diff(sups[used]) >= 0))
        ok, msg = False, f"no decay between levels {k} and {k + 1}"
    elif min_exponent is not None and not slope >= min_exponent:
        ok, msg = False, f"fitted exponent {slope:.3f} below {min_exponent:g}"
    else:
        ok, msg = True, f"monotone decay over {n_above} levels"
    return AsymptoticsReport(case, radii, sups, counts, slope, resid, ok, msg, floor_arr, used,
                             None if reference is None else np.asarray(reference, float),
                             dict(metadata or {}))


def _floor_on(radii, floor):
    """Floor values aligned to ``radii``; accepts a report or a plain array."""
    if floor is None:
        return None
    if isinstance(floor, AsymptoticsReport):
        out = np.full(len(radii), np.nan)
        for i, r in enumerate(radii):
            hit = np.isclose(floor.radii, r, rtol=1e-12)
            if np.any(hit):
                out[i] = floor.sups[np.argmax(hit)]
        return out
    floor = np.asarray(floor, float)
    return np.broadcast_to(floor, np.shape(radii)).copy() if floor.ndim == 0 else floor[: len(radii)]


def default_r0(corner: CornerData) -> float:
    """Half the chart radius of the lens tangent at the corner."""
    return LensDomain.from_corner(corner).chart_radius / 2


# --------------------------------------------------------------------------
# asymptotic checks


def check_smooth_expansion(domain: ConvexCornerDomain, fld, d0: float | None = None,
                           levels: int = LEVELS, min_d_factor: float = 2.0, floor=None,
                           reference=None, min_nodes: int = MIN_NODES) -> AsymptoticsReport:
    """Sup of |(H/(2d))^{1/2} f - 1| over dyadic bands in d, H the curvature at the foot point.

    ``reference`` is an optional exact deviation as a function of (x, d);
    its per-band sup over the same nodes is stored alongside.
    """
    if domain.corners:
        raise VerificationError("the smooth expansion needs a domain without corners")
    s = samples(fld)
    s = s.subset(s.d > min_d_factor * s.spacing)
    if d0 is None:
        d0 = 0.5 * float(np.max(s.d))
    H = domain.boundary_curvature_at_foot(s.x)
    if np.any(H <= 0):
        raise VerificationError("boundary curvature must be positive")
    dev = np.abs(np.sqrt(H / (2 * s.d)) * s.f - 1)
    radii, sups, counts = dyadic_sups(s.d, dev, d0, levels, min_nodes)
    if len(radii) == 0:
        raise VerificationError("all distance bands are starved of nodes")
    ref = None
    if reference is not None:
        rdev = np.asarray(reference(s.x, s.d), float)
        ref = dyadic_sups(s.d, rdev, d0, levels, min_nodes)[1]
    meta = {"d0": d0, "levels": levels, "min_d_factor": min_d_factor,
            "spacing": float(np.max(s.spacing)), "nodes": len(s)}
    return decay_verdict("smooth", radii, sups, counts, _floor_on(radii, floor), reference=ref,
                         metadata=meta)


def cone_ratio(corner: CornerData, table: ConeSolutionTable, x, f):
    """f / (r h(theta)) in the tangent cone's polar coordinates."""
    r, th = tangent_cone(corner).polar(x)
    inside = (th > 0) & (th < table.width)
    out = np.full(len(f), np.nan)
    out[inside] = f[inside] / (r[inside] * eval_profile(table, th[inside]))
    return out


def check_cone_growth(fld, corner: CornerData, table: ConeSolutionTable, r0: float | None = None,
                      levels: int = LEVELS, tol: float = 1e-10, min_exponent: float = 0.4,
                      floor=None, min_nodes: int = MIN_NODES) -> AsymptoticsReport:
    """Sup of |f/(r h(theta)) - 1| over nodes with d >= r^{3/2} in dyadic annuli."""
    if abs(table.mu - corner.mu) > 1e-9:
        raise VerificationError("cone table opening does not match the corner")
    s = samples(fld)
    r0 = default_r0(corner) if r0 is None else r0
    r = np.linalg.norm(s.x - np.asarray(corner.vertex), axis=1)
    sel = s.d >= r**1.5
    ratio = cone_ratio(corner, table, s.x[sel], s.f[sel])
    ok = np.isfinite(ratio)
    radii, sups, counts = dyadic_sups(r[sel][ok], np.abs(ratio[ok] - 1), r0, levels, min_nodes)
    if len(radii) == 0:
        raise VerificationError("all annuli are starved of nodes")
    in_range = (r[sel][ok] <= r0) & (r[sel][ok] > r0 * 2.0**-levels)
    excess = float(np.max(ratio[ok][in_range] - 1)) if np.any(in_range) else math.nan
    meta = {"r0": r0, "levels": levels, "mu": corner.mu, "upper_excess": excess,
            "upper_bound_holds": bool(excess <= 2 * tol), "nodes": int(np.sum(in_range))}
    return decay_verdict("cone", radii, sups, counts, _floor_on(radii, floor),
                         min_exponent=min_exponent, metadata=meta)


def locally_identical(domain: ConvexCornerDomain, other: ConvexCornerDomain, center, radius: float,
                      n: int = 4000, tol: float = 1e-12) -> float:
    """Largest signed-distance mismatch over a fixed point cloud in B(center, radius)."""
    k = np.arange(n) + 0.5
    rr = radius * np.sqrt(k / n)
    ang = k * math.pi * (3 - math.sqrt(5))  # golden-angle spiral
    pts = np.asarray(center, float) + np.column_stack([rr * np.cos(ang), rr * np.sin(ang)])
    a, b = domain.signed_distance(pts), other.signed_distance(pts)
    inside = (a > 0) | (b > 0)
    return float(np.max(np.abs(a[inside] - b[inside]))) if np.any(inside) else 0.0


def check_localization(domain: ConvexCornerDomain, other: ConvexCornerDomain, corner: CornerData,
                       fld, fld_other, r0: float | None = None, levels: int = LEVELS,
                       min_d_factor: float = 5.0, floor=None,
                       min_nodes: int = MIN_NODES) -> AsymptoticsReport:
    """Sup of |f - f*| / f over dyadic annuli at nodes both lattices share."""
    r0 = default_r0(corner) if r0 is None else r0
    mismatch = locally_identical(domain, other, corner.vertex, 2 * r0)
    if mismatch > 1e-12 * max(1.0, domain.diameter()):
        raise GeometryError(f"domains differ near the corner (signed distances off by {mismatch:.3g})")
    a = samples(fld).away_from_boundary(min_d_factor)
    b = samples(fld_other)
    idx = match_nodes(a.x, b.x)
    hit = idx >= 0
    dev = np.abs(a.f[hit] - b.f[idx[hit]]) / a.f[hit]
    r = np.linalg.norm(a.x[hit] - np.asarray(corner.vertex), axis=1)
    radii, sups, counts = dyadic_sups(r, dev, r0, levels, min_nodes)
    if len(radii) == 0:
        raise VerificationError("all annuli are starved of shared nodes")
    meta = {"r0": r0, "levels": levels, "shared_nodes": int(np.sum(hit)),
            "max_deviation": float(np.max(dev)) if dev.size else 0.0}
    rep = decay_verdict("localization", radii, sups, counts, _floor_on(radii, floor), metadata=meta)
    if np.all(sups == 0):
        rep.passed, rep.message = True, "fields agree exactly"
    return rep


def corner_deviation(domain: ConvexCornerDomain, corner: CornerData, model: LensModel, s: Samples):
    """|f / model(chart(x)) - 1| and |x - x0| at nodes inside the chart."""
    img, ok = corner_chart_many(domain, corner, s.x)
    r = np.linalg.norm(s.x - np.asarray(corner.vertex), axis=1)
    dev = np.abs(s.f[ok] / model_height(model, img[ok]) - 1)
    return r[ok], dev


def check_corner_estimate(domain: ConvexCornerDomain, corner: CornerData, fld,
                          model: LensModel | None = None, floor=None, r0: float | None = None,
                          levels: int = LEVELS, min_d_factor: float = 5.0, alpha: float = 1.0,
                          tau: float | None = None, min_nodes: int = MIN_NODES) -> AsymptoticsReport:
    """Sup of |f / model(chart(x)) - 1| over dyadic annuli around the corner.

    The model is the transported cone solution on the lens tangent to the
    corner.  When ``tau`` is given the report records the consistency check
    beta >= min(alpha, tau, 1/3)/2 - 0.05 in its metadata.
    """
    if corner.kappa1 <= 0 or corner.kappa2 <= 0:
        raise VerificationError("the corner estimate needs positive boundary curvatures")
    if model is None:
        model = build_lens_model(LensDomain.from_corner(corner))
    lens = LensDomain.from_corner(corner)
    r0 = default_r0(corner) if r0 is None else r0
    if r0 > lens.chart_radius:
        raise VerificationError(f"r0 exceeds the chart radius {lens.chart_radius:.6g}")
    s = samples(fld).away_from_boundary(min_d_factor)
    r, dev = corner_deviation(domain, corner, model, s)
    radii, sups, counts = dyadic_sups(r, dev, r0, levels, min_nodes)
    if len(radii) < MIN_FIT_LEVELS:
        usable = float(radii[-1] / 2) if len(radii) else r0
        raise VerificationError(f"chart yields only {len(radii)} annuli (smallest usable radius {usable:.3g})")
    meta = {"r0": r0, "levels": levels, "mu": corner.mu, "kappa1": corner.kappa1,
            "kappa2": corner.kappa2, "alpha": alpha, "nodes": int(r.size)}
    rep = decay_verdict("corner", radii, sups, counts, _floor_on(radii, floor), metadata=meta)
    if tau is not None:
        bound = min(alpha, tau, 1.0 / 3.0) / 2 - 0.05
        rep.metadata.update(tau=tau, beta_lower_bound=bound,
                    beta_consistent=bool(np.isfinite(rep.exponent) and rep.exponent >= bound))
    return rep


def lens_floor(corner: CornerData, d_tau: float = 0.04, n_sigma: int = 40, extrapolate: bool = True,
               r0: float | None = None, levels: int = LEVELS, shift: float = 0.0) -> AsymptoticsReport:
    """Deviation of the lens solve from the model: pure discretization error."""
    lens = LensDomain.from_corner(corner)
    dom = lens.domain()
    s = lens_samples(dom, d_tau, n_sigma, extrapolate, shift)
    rep = check_corner_estimate(dom, dom.corners[0], s, r0=r0 if r0 is not None else lens.chart_radius / 2,
                                levels=levels)
    rep.case = "floor"
    rep.metadata.update(d_tau=d_tau, n_sigma=n_sigma, extrapolated=extrapolate)
    return rep


# --------------------------------------------------------------------------
# properties


@dataclass
class PropertyResult:
    """Outcome of one property: the worst margin (positive means violated) and where."""

    name: str
    passed: bool
    worst: float
    witness: list
    detail: str = ""

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "worst": float(self.worst),
                "witness": self.witness, "detail": self.detail}


def _witness(s: Samples, nodes):
    return [{"node": int(i), "x": [float(v) for v in s.x[i]], "f": float(s.f[i])} for i in nodes]


def holder_property(fld, diameter: float, n_pairs: int = 20000, seed: int = 0, n: int = 2) -> PropertyResult:
    """|f(x) - f(y)| <= ((n+1) diam^n)^{1/(n+1)} |x - y|^{1/(n+1)} (1 + 5 h^{1/(n+1)}) on sampled pairs.

    Pairs are random node pairs plus every pair of lattice neighbors, where
    the bound is tightest.
    """
    s = samples(fld)
    rng = np.random.default_rng(seed)
    i = rng.integers(0, len(s), n_pairs)
    j = rng.integers(0, len(s), n_pairs)
    if not isinstance(fld, Samples):
        nb = fld.grid.neighbors
        free_index = np.cumsum(~fld.grid.fixed) - 1
        ii, kk = np.nonzero(nb[:, 1:] >= 0)
        jj = nb[ii, kk + 1]
        keep = ~fld.grid.fixed[ii] & ~fld.grid.fixed[jj]
        i = np.concatenate([i, free_index[ii[keep]]])
        j = np.concatenate([j, free_index[jj[keep]]])
    keep = i != j
    i, j = i[keep], j[keep]
    p = 1.0 / (n + 1)
    C = ((n + 1) * diameter**n) ** p
    h = np.maximum(s.spacing[i], s.spacing[j])
    bound = C * np.linalg.norm(s.x[i] - s.x[j], axis=1) ** p * (1 + 5 * h**p)
    margin = np.abs(s.f[i] - s.f[j]) / bound - 1
    k = int(np.argmax(margin))
    return PropertyResult("holder", bool(margin[k] <= 0), float(margin[k]), _witness(s, [i[k], j[k]]),
                          f"constant {C:.6g}, {len(i)} pairs")


def _aligned_triples(fld: ScalarField):
    """(minus, center, plus) node triples along the lattice axes and diagonals."""
    g = fld.grid
    if g.map.kind != "cartesian":
        raise VerificationError("aligned triples need a Cartesian lattice")
    out = []
    for a, b in ((1, 2), (3, 4), (5, 6), (7, 8)):
        ok = (g.neighbors[:, a] >= 0) & (g.neighbors[:, b] >= 0)
        c = np.nonzero(ok)[0]
        out.append(np.column_stack([g.neighbors[c, b], c, g.neighbors[c, a]]))
    return np.concatenate(out)


def concavity_property(fld: ScalarField, tol: float | None = None,
                       min_d_factor: float = 1.0) -> PropertyResult:
    """f(x) >= (f(x - he) + f(x + he)) / 2 - tol on aligned lattice triples.

    Triples touching a node closer than ``min_d_factor`` spacings to the
    boundary are skipped: short Shortley-Weller arms next to a corner carry
    O(h) errors that can exceed the local second difference.
    """
    t = _aligned_triples(fld)
    g = fld.grid
    far = g.d >= min_d_factor * g.spacing
    t = t[far[t].all(axis=1)]
    f = fld.f
    if tol is None:
        tol = 1e-9 * float(np.max(f))
    gap = 0.5 * (f[t[:, 0]] + f[t[:, 2]]) - f[t[:, 1]] - tol
    k = int(np.argmax(gap))
    s = samples(fld)
    # witness nodes are reported in grid numbering, which equals free numbering on Cartesian grids
    return PropertyResult("concavity", bool(gap[k] <= 0), float(gap[k]), _witness(s, list(t[k])),
                          f"{len(t)} triples, tol {tol:.3g}")


def inclusion_property(inner, outer, tol: float = 1e-10) -> PropertyResult:
    """f_inner <= f_outer + 2 tol max f_outer at the nodes both lattices share."""
    a, b = samples(inner), samples(outer)
    idx = match_nodes(a.x, b.x)
    hit = np.nonzero(idx >= 0)[0]
    if hit.size == 0:
        raise VerificationError("the two fields share no nodes")
    slack = 2 * tol * float(np.max(b.f))
    gap = a.f[hit] - b.f[idx[hit]] - slack
    k = int(np.argmax(gap))
    return PropertyResult("inclusion", bool(gap[k] <= 0), float(gap[k]), _witness(a, [hit[k]]),
                          f"{hit.size} shared nodes")


def scaling_property(fld, scaled, k: float, tol: float = 1e-10) -> PropertyResult:
    """f_k(k x) = k f(x) up to 2 tol max f_k at corresponding nodes."""
    a, b = samples(fld), samples(scaled)
    idx = match_nodes(k * a.x, b.x)
    hit = np.nonzero(idx >= 0)[0]
    if hit.size == 0:
        raise VerificationError("no corresponding nodes under the dilation")
    slack = 2 * tol * float(np.max(b.f))
    gap = np.abs(b.f[idx[hit]] - k * a.f[hit]) - slack
    j = int(np.argmax(gap))
    return PropertyResult("scaling", bool(gap[j] <= 0), float(gap[j]), _witness(a, [hit[j]]),
                          f"k = {k:g}, {hit.size} nodes, unmatched {len(a) - hit.size}")


def cone_domination_property(fld, corner: CornerData, table: ConeSolutionTable,
                             tol: float = 1e-10) -> PropertyResult:
    """f <= r h(theta) (1 + 2 tol) for nodes inside the tangent cone."""
    s = samples(fld)
    ratio = cone_ratio(corner, table, s.x, s.f)
    ok = np.nonzero(np.isfinite(ratio))[0]
    gap = ratio[ok] - 1 - 2 * tol
    k = int(np.argmax(gap))
    return PropertyResult("cone_domination", bool(gap[k] <= 0), float(gap[k]), _witness(s, [ok[k]]))


def property_suite(fld: ScalarField, diameter: float | None = None, outer: ScalarField | None = None,
                   scaled: ScalarField | None = None, k: float = 2.0, tol: float = 1e-10,
                   seed: int = 0, n_pairs: int = 20000) -> list:
    """Hoelder, concavity, and (when the companion fields are given) inclusion and scaling."""
    if diameter is None:
        diameter = fld.grid.domain.diameter()
    out = [holder_property(fld, diameter, n_pairs, seed), concavity_property(fld)]
    if outer is not None:
        out.append(inclusion_property(fld, outer, tol))
    if scaled is not None:
        out.append(scaling_property(fld, scaled, k, tol))
    return out


def with_defect(fld: ScalarField, node: int, factor: float = 1.1, add: float = 0.0) -> ScalarField:
    """A copy of the field with one node's value multiplied by ``factor`` and shifted by ``add``."""
    f = fld.f.copy()
    f[node] = f[node] * factor + add
    return fld.with_f(f)


__all__ = [
    "AsymptoticsReport", "LEVELS", "MIN_NODES", "PropertyResult", "Samples", "VerificationError",
    "check_cone_growth", "check_corner_estimate", "check_localization", "check_smooth_expansion",
    "concavity_property", "cone_domination_property", "cone_ratio", "corner_deviation", "decay_verdict",
    "default_r0", "dyadic_sups", "fit_exponent", "holder_property", "inclusion_property", "lens_floor",
    "lens_samples", "locally_identical", "match_nodes", "property_suite", "richardson", "samples",
    "scaling_property", "with_defect",
]
