"""Model solution on a lens, transported from the cone solution by T_L.

A rigid motion puts the lens vertex x0 at (-L, 0) and the far vertex at
(L, 0).  T_L then sends x0 to the origin, the far vertex to infinity and the
lens onto the cone spanned by its tangent rays at x0 (the boundary action
has derivative 1/2 at x0, so rays keep their directions).  The graph of the
lens solution is the preimage of the cone graph r h(theta); its height over
p is the unique t where T_L(p, t) crosses the cone graph.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cone import ConeSolutionTable, eval_profile, solve_cone_profile
from .geometry import GeometryError, LensDomain, points_from_distances
from .isometry import apply_TL_from_vertex, boundary_conformal_map


class ModelError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class LensModel:
    lens: LensDomain
    L: float
    rotation: np.ndarray  # rows: unit vector toward the far vertex, its left normal
    edge_angle: float  # polar angle of the first image ray in the normalized frame
    table: ConeSolutionTable

    @property
    def mu(self) -> float:
        return self.lens.mu

    def to_frame(self, p):
        """Coordinates relative to x0 in the normalized frame."""
        rel = np.asarray(p, dtype=float) - np.asarray(self.lens.vertex)
        return rel @ self.rotation.T

    def image_ray_angles(self, n: int = 100):
        """Polar angles of boundary images of points sampled along both arcs."""
        out = []
        for arc in self.lens.domain().arcs:
            s = np.linspace(arc.s_start, arc.s_end, n + 2)[1:-1]
            z = self.to_frame(arc.point(s)) + np.array([-self.L, 0.0])
            img = boundary_conformal_map(self.L, z)
            out.append(np.arctan2(img[:, 1], img[:, 0]))
        return out


def build_lens_model(lens: LensDomain, tol: float = 1e-10,
                     table: ConeSolutionTable | None = None) -> LensModel:
    if not 0 < lens.mu < 1:
        raise ModelError("degenerate lens")
    x0 = np.asarray(lens.vertex)
    q = np.asarray(lens.far_vertex)
    e = (q - x0) / np.linalg.norm(q - x0)
    rot = np.array([e, [-e[1], e[0]]])
    L = 0.5 * float(np.linalg.norm(q - x0))
    t1, _ = lens.corner().rays
    t1f = rot @ t1
    edge = math.atan2(t1f[1], t1f[0])
    if table is None:
        table = solve_cone_profile(lens.mu, tol=tol)
    elif abs(table.mu - lens.mu) > 1e-12:
        raise ModelError("cone table opening does not match the lens")
    return LensModel(lens, L, rot, edge, table)


def _cone_height(model: LensModel, Y):
    """Cone graph height over the planar image points; zero outside the cone."""
    r = np.hypot(Y[..., 0], Y[..., 1])
    th = np.arctan2(Y[..., 1], Y[..., 0]) - model.edge_angle
    th = (th + math.pi) % (2 * math.pi) - math.pi
    w = model.table.width
    inside = (th > 0) & (th < w)
    h = np.zeros_like(r)
    if np.any(inside):
        h[inside] = eval_profile(model.table, th[inside])
    return r * h


def model_height(model: LensModel, p, rtol: float = 1e-13, max_iter: int = 200):
    """Height of the transported cone graph over lens points (vectorized)."""
    p = np.asarray(p, dtype=float)
    shape = p.shape[:-1]
    pts = p.reshape(-1, 2)
    d1, d2 = model.lens.distances(pts)
    if np.any((d1 <= 0) | (d2 <= 0)):
        raise ModelError("point not strictly inside the lens")
    u = model.to_frame(pts)
    # the lens solution lies below both hemispheres over the bounding disks
    cap = np.minimum(np.sqrt(d1 * (2 * model.lens.R1 - d1)), np.sqrt(d2 * (2 * model.lens.R2 - d2)))

    def g(t):
        Y = apply_TL_from_vertex(model.L, np.column_stack([u, t]))
        return Y[:, 2] - _cone_height(model, Y)

    a = np.zeros(len(pts))
    b = 2 * cap
    fa = -np.ones(len(pts))  # g < 0 at t -> 0+ (the image lies on the cone floor)
    fb = g(b)
    if np.any(fb <= 0):
        raise ModelError("no sign change in the height bracket")
    side = np.zeros(len(pts), dtype=int)
    # Illinois variant of regula falsi on [0, 2 cap]; the first step is a bisection
    t = 0.5 * (a + b)
    for _ in range(max_iter):
        ft = g(t)
        neg = ft < 0
        a = np.where(neg, t, a)
        b = np.where(neg, b, t)
        fa_new = np.where(neg, ft, np.where(side == -1, fa * 0.5, fa))
        fb_new = np.where(neg, np.where(side == 1, fb * 0.5, fb), ft)
        side = np.where(neg, 1, -1)
        fa, fb = fa_new, fb_new
        if np.all((b - a <= rtol * b) | (ft == 0)):
            break
        t_new = (a * fb - b * fa) / (fb - fa)
        bad = ~((t_new > a) & (t_new < b))
        t = np.where(bad, 0.5 * (a + b), t_new)
    else:
        raise ModelError("height root-find did not converge")
    return np.where(ft == 0, t, 0.5 * (a + b)).reshape(shape)


def model_residual(model: LensModel, p, t):
    """|g(t)| for reported heights, as a consistency diagnostic."""
    pts = np.asarray(p, dtype=float).reshape(-1, 2)
    Y = apply_TL_from_vertex(model.L, np.column_stack([model.to_frame(pts), np.ravel(t)]))
    return np.abs(Y[:, 2] - _cone_height(model, Y))


def model_height_from_distances(model: LensModel, d1, d2):
    pts, ok = points_from_distances(model.lens, d1, d2)
    if not np.all(ok):
        raise GeometryError("distances outside the corner chart")
    return model_height(model, pts)
