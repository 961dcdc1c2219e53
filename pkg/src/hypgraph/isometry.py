"""The half-space isometry T_L, its factorization and closed-form inverse.

T_L fixes the geodesic over the planar segment from (-L, 0) to (L, 0)
setwise, sends (-L, 0, 0) to the origin and the origin to (L, 0, 0), and
carries (L, 0, 0) to infinity.  On the boundary plane it acts as the Mobius
map z -> L (L + z) / (L - z).
"""

from __future__ import annotations

import numpy as np

POLE_TOL = 1e-8


class PoleError(ValueError):
    """Input too close to the point sent to infinity."""


def _pts(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape[-1] != 3:
        raise ValueError("half-space points need three coordinates")
    return p


def apply_TL(L: float, p):
    """Evaluate T_L on points (..., 3) of the closed upper half-space."""
    p = _pts(p)
    x1, x2, x3 = p[..., 0], p[..., 1], p[..., 2]
    den = (x1 - L) ** 2 + x2**2 + x3**2
    if np.any(den <= (POLE_TOL * max(1.0, abs(L))) ** 2):
        raise PoleError(f"point within {POLE_TOL:g} of the pole ({L:g}, 0, 0)")
    s = L / den
    return np.stack([s * (L * L - (x1 * x1 + x2 * x2 + x3 * x3)), s * 2 * L * x2,
                     s * 2 * L * x3], axis=-1)


def _reflect(p):
    # rotation by pi about the vertical axis swaps the planar points (+-L, 0)
    return p * np.array([-1.0, -1.0, 1.0])


def apply_TL_inverse(L: float, p):
    """Closed-form inverse: T_L^{-1} = R T_L R with R(x1, x2, x3) = (-x1, -x2, x3)."""
    p = _pts(p)
    try:
        return _reflect(apply_TL(L, _reflect(p)))
    except PoleError as exc:
        raise PoleError(f"point within {POLE_TOL:g} of (-L, 0, 0), the image of infinity") from exc


def G1(L, p):
    return p + np.array([0.0, 0.0, L])


def G2(L, p):
    """Inversion in the sphere of radius sqrt(2) L about the origin."""
    return 2 * L * L * p / np.sum(p * p, axis=-1, keepdims=True)


def G3(L, p):
    return p - np.array([0.0, 0.0, L])


def G4(L, p):
    return np.stack([p[..., 2], p[..., 1], -p[..., 0]], axis=-1)


def compose_factorization(L: float, p):
    """G3 G2 G1 G4 G3 G2 G1 applied to p (rightmost first)."""
    q = _pts(p)
    for g in (G1, G2, G3, G4, G1, G2, G3):
        q = g(L, q)
    return q


def factorization_check(L: float, p) -> float:
    """Largest deviation between T_L and its seven-step factorization."""
    p = _pts(p)
    return float(np.max(np.linalg.norm(apply_TL(L, p) - compose_factorization(L, p), axis=-1)))


def boundary_conformal_map(L: float, q2d):
    """Action of T_L on the boundary plane, as the complex map L(L+z)/(L-z)."""
    q = np.asarray(q2d, dtype=float)
    z = q[..., 0] + 1j * q[..., 1]
    if np.any(np.abs(L - z) <= POLE_TOL * max(1.0, abs(L))):
        raise PoleError(f"planar point within {POLE_TOL:g} of the pole ({L:g}, 0)")
    w = L * (L + z) / (L - z)
    return np.stack([w.real, w.imag], axis=-1)


def hyperbolic_distance(p, q):
    """Distance in the half-space model, from cosh d = 1 + |p-q|^2 / (2 p3 q3)."""
    p = _pts(p)
    q = _pts(q)
    arg = np.sum((p - q) ** 2, axis=-1) / (2 * p[..., 2] * q[..., 2])
    # arccosh(1 + a) written to keep precision for nearby points
    return np.log1p(arg + np.sqrt(arg * (arg + 2)))


def apply_TL_from_vertex(L: float, u):
    """T_L in coordinates u = x + (L, 0, 0) centered at the planar point (-L, 0).

    Algebraically identical to apply_TL but without the cancellation in
    L^2 - |x|^2 for points close to (-L, 0, 0).
    """
    u = _pts(u)
    u1, u2, u3 = u[..., 0], u[..., 1], u[..., 2]
    den = (u1 - 2 * L) ** 2 + u2**2 + u3**2
    if np.any(den <= (POLE_TOL * max(1.0, abs(L))) ** 2):
        raise PoleError(f"point within {POLE_TOL:g} of the pole ({L:g}, 0, 0)")
    s = L / den
    return np.stack([s * (2 * L * u1 - (u1 * u1 + u2 * u2 + u3 * u3)), s * 2 * L * u2,
                     s * 2 * L * u3], axis=-1)
