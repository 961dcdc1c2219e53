"""Independent reference computations used to generate frozen test values.

Nothing here imports the package's solvers; the helpers only share the
equations, written out again from scratch.
"""

import math

import numpy as np
from scipy.linalg import solve_banded
from scipy.optimize import minimize_scalar


def collocation_cone_coefficient(mu, n=100_000, iters=60, amplitude=4.0, step=0.025):
    """Corner coefficient and midpoint value, continued in mu from mu = 0.5 when mu > 0.5.

    Wide openings have tall profiles that the sine start cannot reach, so each
    solve starts from the previous one on the same graded parameter grid.
    """
    H = None
    for m in list(np.arange(0.5, mu, step)[1:]) + [mu] if mu > 0.5 + step else [mu]:
        a, mid, H = _collocate(m, n, iters, amplitude, H)
    return a, mid


def _collocate(mu, n, iters, amplitude, H0):
    """Corner coefficient from a finite-difference collocation solve.

    Unknown H = h^3 on a cosine-graded grid over the full interval [0, mu*pi]
    with H = 0 at both ends.  Multiplying the H equation by H^{1/3} removes
    the endpoint singularity:

        (1 + H^{2/3}) H^{1/3} H'' - (2/3) H'^2 + 9 H^{4/3} + 3 H^2 + 6 H^{2/3} = 0.

    Returns (a, midpoint value of h).  Damped Newton on the tridiagonal system, then H'(0) from a least-squares
    fit of H/theta in powers of theta^{2/3}.
    """
    width = mu * math.pi
    s = np.linspace(0.0, 1.0, n + 1)
    # sin^2 grading clusters nodes quadratically at both ends
    theta = width * np.sin(0.5 * math.pi * s) ** 2
    hm = np.diff(theta)[:-1]
    hp = np.diff(theta)[1:]
    t_in = theta[1:-1]
    H = amplitude * np.sin(t_in / mu) if H0 is None else H0.copy()

    def residual_and_jac(H):
        Hf = np.concatenate([[0.0], H, [0.0]])
        um, u0, up = Hf[:-2], Hf[1:-1], Hf[2:]
        d2 = 2 * (hm * up - (hm + hp) * u0 + hp * um) / (hm * hp * (hm + hp))
        d1 = (hm**2 * up + (hp**2 - hm**2) * u0 - hp**2 * um) / (hm * hp * (hm + hp))
        c = np.cbrt(u0)
        coef = (1 + c * c) * c
        F = coef * d2 - (2.0 / 3.0) * d1**2 + 9 * u0 * c + 3 * u0**2 + 6 * c * c
        dcoef = (1.0 / 3.0) / (c * c) + 1.0
        # derivatives with respect to (um, u0, up)
        a_m = coef * 2 * hp / (hm * hp * (hm + hp)) - (4.0 / 3.0) * d1 * (-hp**2) / (hm * hp * (hm + hp))
        a_p = coef * 2 * hm / (hm * hp * (hm + hp)) - (4.0 / 3.0) * d1 * hm**2 / (hm * hp * (hm + hp))
        a_0 = (coef * (-2 * (hm + hp)) / (hm * hp * (hm + hp))
               - (4.0 / 3.0) * d1 * (hp**2 - hm**2) / (hm * hp * (hm + hp))
               + dcoef * d2 + 12 * c + 6 * u0 + 4 / c)
        return F, a_m, a_0, a_p

    for _ in range(iters):
        F, a_m, a_0, a_p = residual_and_jac(H)
        ab = np.zeros((3, H.size))
        ab[0, 1:] = a_p[:-1]
        ab[1] = a_0
        ab[2, :-1] = a_m[1:]
        step = solve_banded((1, 1), ab, -F)
        lam = 1.0
        norm0 = np.max(np.abs(F))
        while True:
            trial = H + lam * step
            if np.all(trial > 0) and np.max(np.abs(residual_and_jac(trial)[0])) < norm0 * (1 - 1e-4 * lam):
                break
            lam *= 0.5
            if lam < 1e-10:
                return _finish(H, t_in, width, n) + (H,)
        H = trial
        if np.max(np.abs(step)) * lam < 1e-14 * np.max(H):
            break

    return _finish(H, t_in, width, n) + (H,)


def _finish(H, t_in, width, n):
    k = (t_in > 1e-9 * width) & (t_in < 1e-4 * width)
    x = t_in[k] ** (2.0 / 3.0)
    V = np.stack([np.ones_like(x), x, x * x], axis=1)
    c0 = np.linalg.lstsq(V, H[k] / t_in[k], rcond=None)[0][0]
    return 1.0 / c0, float(np.cbrt(H[n // 2 - 1]) if n % 2 == 0 else np.nan)


def two_circle_intersections(c1, r1, c2, r2):
    """Intersection points of two circles via the complex-plane parametrization."""
    z1, z2 = complex(*c1), complex(*c2)
    d = abs(z2 - z1)
    a = (r1 * r1 - r2 * r2 + d * d) / (2 * d)
    h = math.sqrt(max(r1 * r1 - a * a, 0.0))
    e = (z2 - z1) / d
    base = z1 + a * e
    return (base + 1j * h * e), (base - 1j * h * e)


def brute_force_distance(curve, p, s_grid):
    """Minimum distance from p to curve(s): fine parameter grid, then a bounded 1-D refinement."""
    p = np.asarray(p)
    dist = np.linalg.norm(curve(s_grid) - p, axis=-1)
    k = int(np.argmin(dist))
    lo, hi = s_grid[max(k - 1, 0)], s_grid[min(k + 1, len(s_grid) - 1)]
    res = minimize_scalar(lambda t: float(np.linalg.norm(curve(np.array([t]))[0] - p)),
                          bounds=(lo, hi), method="bounded", options={"xatol": 1e-14})
    return float(min(res.fun, dist[k]))
