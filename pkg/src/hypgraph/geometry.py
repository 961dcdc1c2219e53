"""Planar convex domains bounded by oriented C^2 arcs.

Every arc is traversed with the domain on its left.  A domain is the
intersection of the regions lying on the inner side of each arc's supporting
curve (the full circle, the full ellipse, the full line or the extended
polynomial graph), which is exact for the convex domains handled here and
gives the distance to the boundary as ``min_i sdf_i`` inside the domain.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

GEOM_RTOL = 1e-10
N_SEEDS = 64


class GeometryError(ValueError):
    """Raised for inputs outside a geometric operation's domain of validity."""


def _as_points(p) -> np.ndarray:
    return np.asarray(p, dtype=float)


def rot90(v: np.ndarray) -> np.ndarray:
    """Rotate vectors (..., 2) counterclockwise by a right angle."""
    v = np.asarray(v, dtype=float)
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def _rotation(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


# --------------------------------------------------------------------------
# arcs


class BoundaryArc:
    """Base class of an oriented boundary arc, domain on the left."""

    kind: str = "abstract"
    s_start: float
    s_end: float

    def point(self, s):
        raise NotImplementedError

    def d1(self, s):
        raise NotImplementedError

    def d2(self, s):
        raise NotImplementedError

    def tangent(self, s) -> np.ndarray:
        return _unit(self.d1(s))

    def inward_normal(self, s) -> np.ndarray:
        return rot90(self.tangent(s))

    def curvature(self, s):
        """Signed curvature, positive when the arc bends toward the domain."""
        v = self.d1(s)
        a = self.d2(s)
        cross = v[..., 0] * a[..., 1] - v[..., 1] * a[..., 0]
        return cross / np.linalg.norm(v, axis=-1) ** 3

    @property
    def start(self) -> np.ndarray:
        return self.point(self.s_start)

    @property
    def end(self) -> np.ndarray:
        return self.point(self.s_end)

    def sample(self, n: int) -> np.ndarray:
        return self.point(np.linspace(self.s_start, self.s_end, n))

    def foot_point(self, p):
        """Nearest point on the supporting curve: (parameter, point, distance)."""
        raise NotImplementedError

    def min_radius(self) -> float:
        s = np.linspace(self.s_start, self.s_end, 257)
        k = np.max(np.abs(self.curvature(s)))
        return math.inf if k == 0 else 1.0 / k

    def signed_distance(self, p, check: bool = True):
        """Signed distance to the supporting curve, positive on the domain side.

        With ``check`` the point must lie in the tubular neighborhood where the
        foot point is unique; otherwise a GeometryError is raised.
        """
        p = _as_points(p)
        s, q, dist = self.foot_point(p)
        side = np.sum((p - q) * self.inward_normal(s), axis=-1)
        sd = np.where(side >= 0, dist, -dist)
        if check:
            rad = self.min_radius()
            if np.any(np.abs(sd) >= rad * (1 - 1e-12)):
                raise GeometryError(
                    f"point outside the tubular neighborhood (radius {rad:g}) of the "
                    f"{self.kind} arc; foot point not unique"
                )
        return sd

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class CircleArc(BoundaryArc):
    """Counterclockwise circle arc; the domain lies inside the circle."""

    center: tuple
    radius: float
    angle_start: float
    angle_end: float
    kind: str = field(default="circle", init=False)

    def __post_init__(self):
        if not self.radius > 0:
            raise GeometryError("circle arc radius must be positive")
        if not self.angle_end > self.angle_start:
            raise GeometryError("circle arc must have angle_end > angle_start")

    @property
    def s_start(self):
        return self.angle_start

    @property
    def s_end(self):
        return self.angle_end

    def point(self, s):
        s = np.asarray(s, dtype=float)
        c = np.asarray(self.center, dtype=float)
        return c + self.radius * np.stack([np.cos(s), np.sin(s)], axis=-1)

    def d1(self, s):
        s = np.asarray(s, dtype=float)
        return self.radius * np.stack([-np.sin(s), np.cos(s)], axis=-1)

    def d2(self, s):
        s = np.asarray(s, dtype=float)
        return -self.radius * np.stack([np.cos(s), np.sin(s)], axis=-1)

    def curvature(self, s):
        return np.full(np.shape(s), 1.0 / self.radius)

    def min_radius(self) -> float:
        return self.radius

    def foot_point(self, p):
        p = _as_points(p)
        rel = p - np.asarray(self.center, dtype=float)
        rho = np.linalg.norm(rel, axis=-1)
        s = np.arctan2(rel[..., 1], rel[..., 0])
        return s, self.point(s), np.abs(rho - self.radius)

    def signed_distance(self, p, check: bool = True):
        p = _as_points(p)
        rho = np.linalg.norm(p - np.asarray(self.center, dtype=float), axis=-1)
        sd = self.radius - rho
        if check and np.any(rho <= self.radius * 1e-12):
            raise GeometryError("point at the circle center: foot point not unique")
        return sd

    def to_dict(self) -> dict:
        return {
            "kind": "circle",
            "center": [float(self.center[0]), float(self.center[1])],
            "radius": float(self.radius),
            "angle_start": float(self.angle_start),
            "angle_end": float(self.angle_end),
        }


class ParametricArc(BoundaryArc):
    """Arc given by a regular parametrization with first and second derivatives.

    The supporting curve is explored on ``search_range`` (which may extend past
    the arc's own parameter interval) when looking for foot points.  Closed
    curves set ``period`` so the search wraps.
    """

    def __init__(
        self,
        point: Callable,
        d1: Callable,
        d2: Callable,
        s_start: float,
        s_end: float,
        search_range: tuple | None = None,
        period: float | None = None,
        kind: str = "analytic",
        params: dict | None = None,
    ):
        if not s_end > s_start:
            raise GeometryError("parametric arc needs s_end > s_start")
        self._point, self._d1, self._d2 = point, d1, d2
        self.s_start, self.s_end = float(s_start), float(s_end)
        self.period = period
        if search_range is None:
            if period is not None:
                search_range = (0.0, period)
            else:
                ext = 0.5 * (s_end - s_start)
                search_range = (s_start - ext, s_end + ext)
        self.search_range = tuple(float(v) for v in search_range)
        self.kind = kind
        self._params = params
        speed = np.linalg.norm(self.d1(np.linspace(s_start, s_end, 129)), axis=-1)
        if np.min(speed) <= 0:
            raise GeometryError("parametrization is not regular")

    def point(self, s):
        return np.asarray(self._point(np.asarray(s, dtype=float)), dtype=float)

    def d1(self, s):
        return np.asarray(self._d1(np.asarray(s, dtype=float)), dtype=float)

    def d2(self, s):
        return np.asarray(self._d2(np.asarray(s, dtype=float)), dtype=float)

    def foot_point(self, p):
        p = _as_points(p)
        shape = p.shape[:-1]
        pts = p.reshape(-1, 2)
        lo, hi = self.search_range
        if self.period is None:
            seeds = np.linspace(lo, hi, N_SEEDS)
        else:
            seeds = lo + (hi - lo) * np.arange(N_SEEDS) / N_SEEDS
        ds = seeds[1] - seeds[0]
        curve = self.point(seeds)
        d2 = np.sum((pts[:, None, :] - curve[None, :, :]) ** 2, axis=-1)
        n_try = min(3, N_SEEDS)
        best = np.argsort(d2, axis=1)[:, :n_try]
        best_s = np.full(len(pts), np.nan)
        best_d = np.full(len(pts), np.inf)
        for k in range(n_try):
            s0 = seeds[best[:, k]]
            s = self._newton_foot(pts, s0, s0 - ds, s0 + ds)
            d = np.linalg.norm(pts - self.point(s), axis=-1)
            better = d < best_d
            best_s = np.where(better, s, best_s)
            best_d = np.where(better, d, best_d)
        if self.period is not None:
            best_s = np.mod(best_s - lo, self.period) + lo
        return (
            best_s.reshape(shape),
            self.point(best_s).reshape(shape + (2,)),
            best_d.reshape(shape),
        )

    def _newton_foot(self, pts, s, a, b, iters: int = 40):
        """Safeguarded Newton on (gamma(s) - p) . gamma'(s) = 0 within [a, b]."""
        if self.period is None:
            lo, hi = self.search_range
            a = np.maximum(a, lo)
            b = np.minimum(b, hi)
        for _ in range(iters):
            r = self.point(s) - pts
            v = self.d1(s)
            acc = self.d2(s)
            g = np.sum(r * v, axis=-1)
            dg = np.sum(v * v, axis=-1) + np.sum(r * acc, axis=-1)
            step = np.where(dg > 0, g / np.where(dg > 0, dg, 1.0), 0.0)
            s_new = s - step
            bad = (dg <= 0) | (s_new < a) | (s_new > b)
            # descend along the squared distance instead of a wild Newton jump
            fallback = np.clip(s - np.sign(g) * 0.25 * (b - a), a, b)
            s_new = np.where(bad, fallback, s_new)
            if np.all(np.abs(s_new - s) <= 1e-15 * (1 + np.abs(s))):
                s = s_new
                break
            s = s_new
        return s

    def to_dict(self) -> dict:
        if self._params is None:
            raise GeometryError("arc built from bare callables cannot be serialized")
        return dict(self._params)


def ellipse_arc(center, semi_axes, rotation, t_start, t_end) -> ParametricArc:
    """Counterclockwise ellipse arc, domain inside the ellipse."""
    a, b = (float(v) for v in semi_axes)
    if not (a > 0 and b > 0):
        raise GeometryError("ellipse semi-axes must be positive")
    c = np.asarray(center, dtype=float)
    R = _rotation(float(rotation))

    def point(t):
        loc = np.stack([a * np.cos(t), b * np.sin(t)], axis=-1)
        return c + loc @ R.T

    def d1(t):
        return np.stack([-a * np.sin(t), b * np.cos(t)], axis=-1) @ R.T

    def d2(t):
        return np.stack([-a * np.cos(t), -b * np.sin(t)], axis=-1) @ R.T

    params = {
        "kind": "ellipse",
        "center": [float(c[0]), float(c[1])],
        "semi_axes": [a, b],
        "rotation": float(rotation),
        "t_start": float(t_start),
        "t_end": float(t_end),
    }
    return ParametricArc(point, d1, d2, t_start, t_end, period=2 * math.pi,
                         kind="ellipse", params=params)


def segment_arc(start, end) -> ParametricArc:
    """Straight segment; the domain lies to the left of start -> end."""
    p0 = np.asarray(start, dtype=float)
    p1 = np.asarray(end, dtype=float)
    v = p1 - p0
    length = float(np.linalg.norm(v))
    if length == 0:
        raise GeometryError("degenerate segment")

    def point(s):
        return p0 + np.asarray(s, dtype=float)[..., None] * v

    def d1(s):
        return np.broadcast_to(v, np.shape(s) + (2,)).copy()

    def d2(s):
        return np.zeros(np.shape(s) + (2,))

    params = {"kind": "segment", "start": p0.tolist(), "end": p1.tolist()}
    arc = ParametricArc(point, d1, d2, 0.0, 1.0, search_range=(-1e6, 1e6),
                        kind="segment", params=params)

    def foot(p, _p0=p0, _v=v):
        p = _as_points(p)
        s = np.sum((p - _p0) * _v, axis=-1) / np.dot(_v, _v)
        q = point(s)
        return s, q, np.linalg.norm(p - q, axis=-1)

    arc.foot_point = foot
    arc.min_radius = lambda: math.inf
    return arc


def polynomial_arc(coeffs: Sequence[float], x_start: float, x_end: float,
                   origin=(0.0, 0.0), rotation: float = 0.0) -> ParametricArc:
    """Graph y = sum c_k x^k in a rotated frame; domain above the graph."""
    c = np.asarray(coeffs, dtype=float)
    dc = np.polynomial.polynomial.polyder(c) if len(c) > 1 else np.zeros(1)
    ddc = np.polynomial.polynomial.polyder(dc) if len(dc) > 1 else np.zeros(1)
    o = np.asarray(origin, dtype=float)
    R = _rotation(float(rotation))
    pv = np.polynomial.polynomial.polyval

    def point(x):
        return o + np.stack([x, pv(x, c)], axis=-1) @ R.T

    def d1(x):
        return np.stack([np.ones_like(x), pv(x, dc)], axis=-1) @ R.T

    def d2(x):
        return np.stack([np.zeros_like(x), pv(x, ddc)], axis=-1) @ R.T

    params = {
        "kind": "polynomial",
        "coeffs": c.tolist(),
        "x_start": float(x_start),
        "x_end": float(x_end),
        "origin": o.tolist(),
        "rotation": float(rotation),
    }
    return ParametricArc(point, d1, d2, x_start, x_end, kind="polynomial", params=params)


def arc_from_dict(d: dict) -> BoundaryArc:
    kind = d.get("kind")
    if kind == "circle":
        return CircleArc(tuple(d["center"]), float(d["radius"]),
                         float(d["angle_start"]), float(d["angle_end"]))
    if kind == "ellipse":
        return ellipse_arc(d["center"], d["semi_axes"], d.get("rotation", 0.0),
                           d["t_start"], d["t_end"])
    if kind == "segment":
        return segment_arc(d["start"], d["end"])
    if kind == "polynomial":
        return polynomial_arc(d["coeffs"], d["x_start"], d["x_end"],
                              d.get("origin", (0.0, 0.0)), d.get("rotation", 0.0))
    raise GeometryError(f"unknown arc kind {kind!r}")


def signed_distance(arc: BoundaryArc, p):
    """Signed distance from ``p`` to ``arc``'s supporting curve (checked)."""
    return arc.signed_distance(p, check=True)


def boundary_curvature(arc: BoundaryArc, s):
    """Curvature with respect to the inward normal at parameter ``s``."""
    return arc.curvature(s)


# --------------------------------------------------------------------------
# corners, cones, lenses


@dataclass(frozen=True)
class ConeDomain:
    vertex: tuple
    axis: tuple
    mu: float

    def __post_init__(self):
        if not 0 < self.mu < 1:
            raise GeometryError("cone opening requires 0 < mu < 1")

    @property
    def edge1(self) -> np.ndarray:
        """Direction of the first boundary ray (polar angle 0)."""
        return _rotation(-0.5 * self.mu * math.pi) @ np.asarray(self.axis, float)

    def polar(self, p):
        """Polar radius and angle measured from the first ray, in (0, mu*pi) inside."""
        rel = _as_points(p) - np.asarray(self.vertex, float)
        e1 = self.edge1
        e2 = rot90(e1)
        x = rel @ e1
        y = rel @ e2
        return np.hypot(x, y), np.arctan2(y, x)

    def contains(self, p):
        r, th = self.polar(p)
        return (r > 0) & (th > 0) & (th < self.mu * math.pi)


@dataclass(frozen=True)
class CornerData:
    """Corner of a domain: vertex, opening mu*pi, inner normals, curvatures.

    ``arc1`` leaves the vertex and ``arc2`` arrives at it (indices into the
    owning domain's arc list, or None for free-standing corners).
    """

    vertex: tuple
    mu: float
    nu1: tuple
    nu2: tuple
    kappa1: float
    kappa2: float
    arc1: int | None = None
    arc2: int | None = None

    def __post_init__(self):
        for name in ("vertex", "nu1", "nu2"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        for name in ("mu", "kappa1", "kappa2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not 0 < self.mu < 1:
            raise GeometryError("corner requires 0 < mu < 1")
        if not (self.kappa1 > 0 and self.kappa2 > 0):
            raise GeometryError("corner curvatures must be positive")
        for nu in (self.nu1, self.nu2):
            if abs(math.hypot(*nu) - 1) > 1e-9:
                raise GeometryError("inner normals must be unit vectors")
        t1, t2 = self.rays
        ang = math.acos(max(-1.0, min(1.0, float(np.dot(t1, t2)))))
        if abs(ang - self.mu * math.pi) > 1e-7:
            raise GeometryError(
                f"normals give opening {ang / math.pi:.12g}*pi, not mu={self.mu}"
            )

    @property
    def R1(self) -> float:
        return 1.0 / self.kappa1

    @property
    def R2(self) -> float:
        return 1.0 / self.kappa2

    @property
    def rays(self):
        """Tangent rays of sigma_1 and sigma_2 leaving the vertex."""
        n1 = np.asarray(self.nu1, float)
        n2 = np.asarray(self.nu2, float)
        return np.array([n1[1], -n1[0]]), np.array([-n2[1], n2[0]])

    def to_dict(self) -> dict:
        d = {
            "vertex": [float(v) for v in self.vertex],
            "mu": float(self.mu),
            "nu1": [float(v) for v in self.nu1],
            "nu2": [float(v) for v in self.nu2],
            "kappa1": float(self.kappa1),
            "kappa2": float(self.kappa2),
        }
        if self.arc1 is not None:
            d["arc1"], d["arc2"] = self.arc1, self.arc2
        return d


def tangent_cone(corner: CornerData) -> ConeDomain:
    """Tangent cone at a corner: vertex, bisector along nu1 + nu2, opening mu*pi."""
    axis = _unit(np.asarray(corner.nu1, float) + np.asarray(corner.nu2, float))
    return ConeDomain(tuple(corner.vertex), tuple(axis), corner.mu)


def corner_chord_length(R1: float, R2: float, mu: float) -> float:
    """Distance between the two intersection points of the tangent circles."""
    if not (R1 > 0 and R2 > 0 and 0 < mu < 1):
        raise GeometryError("need R1, R2 > 0 and 0 < mu < 1")
    g = math.pi - mu * math.pi
    return 2 * R1 * R2 * math.sin(g) / math.sqrt(R1**2 + R2**2 - 2 * R1 * R2 * math.cos(g))


def circle_intersections(c1, r1, c2, r2):
    """Both intersection points of two circles (vectorized over leading axes).

    Returns (p_plus, p_minus, ok) where ``ok`` flags intersecting pairs.
    """
    c1 = _as_points(c1)
    c2 = _as_points(c2)
    r1 = np.asarray(r1, float)
    r2 = np.asarray(r2, float)
    dvec = c2 - c1
    dist = np.linalg.norm(dvec, axis=-1)
    ok = (r1 > 0) & (r2 > 0) & (dist > 0) & (dist <= r1 + r2) & (dist >= np.abs(r1 - r2))
    safe = np.where(dist > 0, dist, 1.0)
    a = (r1**2 - r2**2 + dist**2) / (2 * safe)
    hh = np.sqrt(np.clip(r1**2 - a**2, 0.0, None))
    e = dvec / safe[..., None]
    base = c1 + a[..., None] * e
    off = hh[..., None] * rot90(e)
    return base + off, base - off, ok


@dataclass(frozen=True)
class LensDomain:
    """Intersection of the two disks tangent to a corner's boundary curves."""

    vertex: tuple
    far_vertex: tuple
    mu: float
    R1: float
    R2: float
    c1: tuple
    c2: tuple

    def __post_init__(self):
        for name in ("vertex", "far_vertex", "c1", "c2"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        for v in (self.vertex, self.far_vertex):
            for c, R in ((self.c1, self.R1), (self.c2, self.R2)):
                if abs(math.dist(v, c) - R) > 1e-9 * R:
                    raise GeometryError("lens vertices must lie on both circles")

    @classmethod
    def from_corner(cls, corner: CornerData) -> "LensDomain":
        x0 = np.asarray(corner.vertex, float)
        c1 = x0 + corner.R1 * np.asarray(corner.nu1, float)
        c2 = x0 + corner.R2 * np.asarray(corner.nu2, float)
        pa, pb, ok = circle_intersections(c1, corner.R1, c2, corner.R2)
        if not ok:
            raise GeometryError("tangent circles do not intersect")
        q = pa if np.linalg.norm(pa - x0) > np.linalg.norm(pb - x0) else pb
        return cls(tuple(x0), tuple(q), corner.mu, corner.R1, corner.R2, tuple(c1), tuple(c2))

    @property
    def chart_radius(self) -> float:
        return min(self.R1, self.R2) * math.sin(0.5 * self.mu * math.pi) / 2

    @property
    def chord(self) -> float:
        return float(np.linalg.norm(np.subtract(self.far_vertex, self.vertex)))

    def distances(self, p):
        """Signed distances (d1, d2) to the two circles, positive inside."""
        p = _as_points(p)
        d1 = self.R1 - np.linalg.norm(p - np.asarray(self.c1), axis=-1)
        d2 = self.R2 - np.linalg.norm(p - np.asarray(self.c2), axis=-1)
        return d1, d2

    def corner(self) -> CornerData:
        x0 = np.asarray(self.vertex)
        nu1 = (np.asarray(self.c1) - x0) / self.R1
        nu2 = (np.asarray(self.c2) - x0) / self.R2
        return CornerData(tuple(x0), self.mu, tuple(nu1), tuple(nu2),
                          1 / self.R1, 1 / self.R2)

    def domain(self) -> "ConvexCornerDomain":
        x0 = np.asarray(self.vertex)
        q = np.asarray(self.far_vertex)
        c1 = np.asarray(self.c1)
        c2 = np.asarray(self.c2)

        def ang(c, p):
            return math.atan2(p[1] - c[1], p[0] - c[0])

        a0, a1 = ang(c1, x0), ang(c1, q)
        if a1 <= a0:
            a1 += 2 * math.pi
        b0, b1 = ang(c2, q), ang(c2, x0)
        if b1 <= b0:
            b1 += 2 * math.pi
        arcs = [CircleArc(tuple(c1), self.R1, a0, a1), CircleArc(tuple(c2), self.R2, b0, b1)]
        return ConvexCornerDomain.from_arcs(arcs)


def points_from_distances(lens: LensDomain, d1, d2, enforce_chart: bool = True):
    """Vectorized inverse of the lens distance map.

    Returns (points, ok).  The intersection branch nearer the vertex is taken;
    ``ok`` is False where the offset circles miss each other or the result
    falls outside the chart radius.
    """
    d1 = np.asarray(d1, float)
    d2 = np.asarray(d2, float)
    r1 = lens.R1 - d1
    r2 = lens.R2 - d2
    shape = np.broadcast(d1, d2).shape
    c1 = np.broadcast_to(np.asarray(lens.c1, float), shape + (2,))
    c2 = np.broadcast_to(np.asarray(lens.c2, float), shape + (2,))
    pa, pb, ok = circle_intersections(c1, r1, c2, r2)
    x0 = np.asarray(lens.vertex, float)
    da = np.linalg.norm(pa - x0, axis=-1)
    db = np.linalg.norm(pb - x0, axis=-1)
    lex = (pa[..., 0] < pb[..., 0]) | ((pa[..., 0] == pb[..., 0]) & (pa[..., 1] <= pb[..., 1]))
    take_a = (da < db) | ((da == db) & lex)
    pts = np.where(take_a[..., None], pa, pb)
    if enforce_chart:
        ok = ok & (np.minimum(da, db) <= lens.chart_radius * (1 + 1e-12))
    return pts, ok


def point_from_distances(lens: LensDomain, d1: float, d2: float) -> np.ndarray:
    """Point whose signed distances to the lens circles are (d1, d2)."""
    pts, ok = points_from_distances(lens, d1, d2)
    if not bool(ok):
        raise GeometryError(
            f"no chart point with distances ({d1:g}, {d2:g}): offset circles "
            f"disjoint/nested or beyond chart radius {lens.chart_radius:g}"
        )
    return pts


def corner_signed_distances(domain: "ConvexCornerDomain", corner: CornerData, p):
    arc1 = domain.arcs[corner.arc1]
    arc2 = domain.arcs[corner.arc2]
    return arc1.signed_distance(p, check=False), arc2.signed_distance(p, check=False)


def corner_chart_many(domain: "ConvexCornerDomain", corner: CornerData, p):
    """Vectorized corner chart; returns (images, ok)."""
    p = _as_points(p)
    lens = LensDomain.from_corner(corner)
    s1, s2 = corner_signed_distances(domain, corner, p)
    out, ok = points_from_distances(lens, s1, s2)
    near = np.linalg.norm(p - np.asarray(corner.vertex), axis=-1) <= lens.chart_radius
    return out, ok & near


def corner_chart(domain: "ConvexCornerDomain", corner: CornerData, p) -> np.ndarray:
    """Map p near a corner to the lens point with the same signed distances."""
    out, ok = corner_chart_many(domain, corner, np.asarray(p, float))
    if not bool(np.all(ok)):
        raise GeometryError("point outside the corner chart neighborhood")
    return out


# --------------------------------------------------------------------------
# domains


def _corner_from_arcs(arc_out: BoundaryArc, arc_in: BoundaryArc, i_out: int, i_in: int) -> CornerData:
    v = arc_out.start
    nu1 = arc_out.inward_normal(arc_out.s_start)
    nu2 = arc_in.inward_normal(arc_in.s_end)
    t1 = arc_out.tangent(arc_out.s_start)
    t2 = -arc_in.tangent(arc_in.s_end)
    mu = math.acos(max(-1.0, min(1.0, float(np.dot(t1, t2))))) / math.pi
    return CornerData(tuple(v), mu, tuple(nu1), tuple(nu2),
                      float(arc_out.curvature(arc_out.s_start)),
                      float(arc_in.curvature(arc_in.s_end)), i_out, i_in)


@dataclass(frozen=True)
class ConvexCornerDomain:
    arcs: tuple
    corners: tuple = ()
    convex: bool = True

    @classmethod
    def from_arcs(cls, arcs, corners=None, check: bool = True) -> "ConvexCornerDomain":
        arcs = tuple(arcs)
        n = len(arcs)
        if corners is None:
            found = []
            for j in range(n):
                i = (j - 1) % n
                t_in = arcs[i].tangent(arcs[i].s_end)
                t_out = arcs[j].tangent(arcs[j].s_start)
                if n > 1 and np.linalg.norm(t_in - t_out) > 1e-8:
                    found.append(_corner_from_arcs(arcs[j], arcs[i], j, i))
            corners = found
        dom = cls(arcs, tuple(corners), True)
        if check:
            dom.validate()
        return dom

    def validate(self):
        n = len(self.arcs)
        scale = self.diameter()
        for i in range(n):
            a, b = self.arcs[i], self.arcs[(i + 1) % n]
            gap = np.linalg.norm(a.end - b.start)
            if gap > 1e-9 * max(scale, 1.0):
                raise GeometryError(f"boundary not closed between arcs {i} and {(i + 1) % n}")
            t_in = a.tangent(a.s_end)
            t_out = b.tangent(b.s_start)
            if n > 1 and np.linalg.norm(t_in - t_out) > 1e-8:
                if not any(np.linalg.norm(np.subtract(c.vertex, b.start)) < 1e-8 * max(scale, 1)
                           for c in self.corners):
                    raise GeometryError(f"junction {i}->{(i + 1) % n} has no corner entry")
        ok, worst = self.check_convex()
        if not ok:
            raise GeometryError(f"domain fails the support-line convexity test ({worst:g})")

    def boundary_samples(self, n_per_arc: int = 200):
        pts, nrm = [], []
        for arc in self.arcs:
            s = np.linspace(arc.s_start, arc.s_end, n_per_arc)
            pts.append(arc.point(s))
            nrm.append(arc.inward_normal(s))
        return np.concatenate(pts), np.concatenate(nrm)

    def check_convex(self, n_per_arc: int = 200, tol: float = 1e-9):
        """Sampled support-line test; returns (ok, worst signed violation)."""
        pts, nrm = self.boundary_samples(n_per_arc)
        side = np.einsum("jk,ik->ij", pts, nrm) - np.sum(pts * nrm, axis=1)[:, None]
        worst = float(np.min(side))
        return worst >= -tol * max(1.0, self.diameter()), worst

    def bbox(self):
        pts, _ = self.boundary_samples(400)
        return pts.min(axis=0), pts.max(axis=0)

    def diameter(self) -> float:
        pts, _ = self.boundary_samples(100)
        d = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        return float(d.max())

    def signed_distance(self, p):
        """Distance to the boundary inside, a negative value outside."""
        p = _as_points(p)
        return np.min(np.stack([a.signed_distance(p, check=False) for a in self.arcs]), axis=0)

    def contains(self, p):
        return self.signed_distance(p) > 0

    def nearest(self, p):
        """Index of the nearest arc (by supporting-curve distance) and its foot parameter."""
        p = _as_points(p)
        sds = np.stack([a.signed_distance(p, check=False) for a in self.arcs])
        idx = np.argmin(sds, axis=0)
        s = np.empty(idx.shape)
        for i, a in enumerate(self.arcs):
            m = idx == i
            if np.any(m):
                s[m] = a.foot_point(p[m])[0]
        return idx, s

    def boundary_curvature_at_foot(self, p):
        idx, s = self.nearest(p)
        out = np.empty(idx.shape)
        for i, a in enumerate(self.arcs):
            m = idx == i
            if np.any(m):
                out[m] = a.curvature(s[m])
        return out

    def scaled(self, k: float) -> "ConvexCornerDomain":
        """The domain dilated by ``k`` about the origin."""
        return domain_from_dict(_scale_dict(self.to_dict(), k))

    def to_dict(self) -> dict:
        return {"arcs": [a.to_dict() for a in self.arcs],
                "corners": [c.to_dict() for c in self.corners]}


def _scale_dict(d: dict, k: float) -> dict:
    arcs = []
    for a in d["arcs"]:
        a = dict(a)
        if a["kind"] == "circle":
            a["center"] = [k * v for v in a["center"]]
            a["radius"] *= k
        elif a["kind"] == "ellipse":
            a["center"] = [k * v for v in a["center"]]
            a["semi_axes"] = [k * v for v in a["semi_axes"]]
        elif a["kind"] == "segment":
            a["start"] = [k * v for v in a["start"]]
            a["end"] = [k * v for v in a["end"]]
        elif a["kind"] == "polynomial":
            c = a["coeffs"]
            a["coeffs"] = [ck * k ** (1 - i) for i, ck in enumerate(c)]
            a["x_start"] *= k
            a["x_end"] *= k
            a["origin"] = [k * v for v in a.get("origin", (0, 0))]
        arcs.append(a)
    corners = []
    for c in d.get("corners", []):
        c = dict(c)
        c["vertex"] = [k * v for v in c["vertex"]]
        c["kappa1"] /= k
        c["kappa2"] /= k
        corners.append(c)
    return {"arcs": arcs, "corners": corners}


def domain_from_dict(d: dict) -> ConvexCornerDomain:
    arcs = [arc_from_dict(a) for a in d["arcs"]]
    corners = None
    if d.get("corners"):
        auto = ConvexCornerDomain.from_arcs(arcs, check=False).corners
        corners = []
        for c in d["corners"]:
            arc1, arc2 = c.get("arc1"), c.get("arc2")
            if arc1 is None:
                match = [a for a in auto if np.linalg.norm(np.subtract(a.vertex, c["vertex"])) < 1e-8]
                if not match:
                    raise GeometryError(f"corner at {c['vertex']} is not an arc junction")
                arc1, arc2 = match[0].arc1, match[0].arc2
            corners.append(CornerData(tuple(c["vertex"]), float(c["mu"]), tuple(c["nu1"]),
                                      tuple(c["nu2"]), float(c["kappa1"]), float(c["kappa2"]),
                                      int(arc1), int(arc2)))
    return ConvexCornerDomain.from_arcs(arcs, corners)


def load_domain(path) -> ConvexCornerDomain:
    with open(path) as fh:
        return domain_from_dict(json.load(fh))


# --------------------------------------------------------------------------
# builders


def disk_domain(radius: float = 1.0, center=(0.0, 0.0)) -> ConvexCornerDomain:
    return ConvexCornerDomain.from_arcs([CircleArc(tuple(center), radius, -math.pi, math.pi)])


def ellipse_domain(a: float, b: float, center=(0.0, 0.0), rotation: float = 0.0) -> ConvexCornerDomain:
    return ConvexCornerDomain.from_arcs([ellipse_arc(center, (a, b), rotation, 0.0, 2 * math.pi)])


def make_lens(mu: float, kappa1: float, kappa2: float, vertex=(0.0, 0.0),
              bisector_angle: float = 0.0) -> LensDomain:
    """Lens with its corner at ``vertex`` opening toward ``bisector_angle``."""
    half = 0.5 * mu * math.pi
    R = _rotation(bisector_angle)
    nu1 = R @ np.array([math.sin(half), math.cos(half)])
    nu2 = R @ np.array([math.sin(half), -math.cos(half)])
    corner = CornerData(tuple(vertex), mu, tuple(nu1), tuple(nu2), kappa1, kappa2)
    return LensDomain.from_corner(corner)


def lens_domain(mu: float, kappa1: float, kappa2: float, vertex=(0.0, 0.0),
                bisector_angle: float = 0.0) -> ConvexCornerDomain:
    return make_lens(mu, kappa1, kappa2, vertex, bisector_angle).domain()


def _ellipse_param_for_curvature(a: float, b: float, kappa: float) -> float:
    """Parameter t in (0, pi/2) where the ellipse (a, b) has curvature kappa."""
    # kappa(t) = ab / (a^2 sin^2 t + b^2 cos^2 t)^{3/2}
    s2 = ((a * b / kappa) ** (2 / 3) - b**2) / (a**2 - b**2)
    if not 0 < s2 < 1:
        raise GeometryError("ellipse cannot attain the requested curvature off its vertices")
    return math.asin(math.sqrt(s2))


def perturbed_lens_domain(mu: float, kappa1: float, kappa2: float,
                          semi_axes=(1.5, 1.0), curvature_scale: float = 1.0) -> ConvexCornerDomain:
    """Lens whose first arc is replaced by an ellipse arc.

    The ellipse passes through the vertex with the same tangent and curvature
    ``curvature_scale * kappa1`` there, at a non-vertex point of the ellipse so
    the curvature varies along the arc.
    """
    lens = make_lens(mu, kappa1, kappa2)
    corner = lens.corner()
    a, b = (s / (curvature_scale * kappa1) for s in semi_axes)
    t0 = _ellipse_param_for_curvature(a, b, curvature_scale * kappa1)
    x0 = np.asarray(corner.vertex)
    t1, _ = corner.rays
    tang_local = np.array([-a * math.sin(t0), b * math.cos(t0)])
    rot = math.atan2(t1[1], t1[0]) - math.atan2(tang_local[1], tang_local[0])
    Rm = _rotation(rot)
    center = x0 - Rm @ np.array([a * math.cos(t0), b * math.sin(t0)])
    probe = ellipse_arc(center, (a, b), rot, t0, t0 + 2 * math.pi - 1e-9)
    c2 = np.asarray(lens.c2)
    # second intersection of the ellipse with circle 2, walking from the vertex
    ts = np.linspace(t0 + 1e-6, t0 + 2 * math.pi - 1e-6, 20001)
    g = lens.R2 - np.linalg.norm(probe.point(ts) - c2, axis=-1)
    sign_change = np.nonzero(np.diff(np.sign(g)) != 0)[0]
    if len(sign_change) == 0:
        raise GeometryError("ellipse does not meet the second circle again")
    k = sign_change[0]
    from scipy.optimize import brentq

    t_end = brentq(lambda t: lens.R2 - np.linalg.norm(probe.point(t) - c2), ts[k], ts[k + 1],
                   xtol=1e-15)
    q = probe.point(t_end)
    ell = ellipse_arc(center, (a, b), rot, t0, t_end)
    a0 = math.atan2(q[1] - c2[1], q[0] - c2[0])
    a1 = math.atan2(x0[1] - c2[1], x0[0] - c2[0])
    if a1 <= a0:
        a1 += 2 * math.pi
    circ = CircleArc(tuple(c2), lens.R2, a0, a1)
    return ConvexCornerDomain.from_arcs([ell, circ])


def capped_lens_domain(mu: float, kappa1: float, kappa2: float, cap_radius: float = 3.0,
                       cap_fraction: float = 0.7) -> ConvexCornerDomain:
    """Lens with its far vertex cut off by a large circular cap.

    The cap circle passes through the lens axis at ``cap_fraction`` of the
    chord from the vertex, so the domain equals the lens near the vertex.
    """
    lens = make_lens(mu, kappa1, kappa2)
    x0 = np.asarray(lens.vertex)
    q = np.asarray(lens.far_vertex)
    e = (q - x0) / np.linalg.norm(q - x0)
    apex = x0 + cap_fraction * (q - x0)
    c3 = apex - cap_radius * e
    c1, c2 = np.asarray(lens.c1), np.asarray(lens.c2)

    def meet(c, R):
        pa, pb, ok = circle_intersections(c, R, c3, cap_radius)
        if not ok:
            raise GeometryError("cap does not cut the lens")
        return pa if np.dot(pa - x0, e) > np.dot(pb - x0, e) else pb

    m1 = meet(c1, lens.R1)
    m2 = meet(c2, lens.R2)

    def ang(c, p):
        return math.atan2(p[1] - c[1], p[0] - c[0])

    def arc(c, R, p_from, p_to):
        a0, a1 = ang(c, p_from), ang(c, p_to)
        if a1 <= a0:
            a1 += 2 * math.pi
        return CircleArc(tuple(c), R, a0, a1)

    arcs = [arc(c1, lens.R1, x0, m1), arc(c3, cap_radius, m1, m2), arc(c2, lens.R2, m2, x0)]
    return ConvexCornerDomain.from_arcs(arcs)
