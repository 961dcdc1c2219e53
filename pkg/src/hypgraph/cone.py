"""Homogeneous solutions r h(theta) on planar cones of opening mu*pi.

The profile solves

    h'' h + h'' h^3 + 3 h^2 + h^4 + 2 + 2 h'^2 = 0,   h(0) = h(mu*pi) = 0.

Near an endpoint h ~ a^{-1/3} theta^{1/3}, so the solver works with
H = h^3, which is asymptotically linear there:

    H'' = [(2/3) H'^2 H^{-1/3} - 9 H - 3 H^{5/3} - 6 H^{1/3}] / (1 + H^{2/3}).

The profile is symmetric about the midpoint.  We shoot from the midpoint
with H' = 0 and unknown H = m^3 and adjust m until H reaches zero exactly at
the endpoint.  The corner coefficient is a = 1 / H'(0+).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

THETA_MIN_FRACTION = 1e-8


class ConeSolverError(RuntimeError):
    pass


def profile_rhs(theta, y):
    """Right-hand side of the first-order system for (H, H')."""
    H, Hp = y
    if H <= 0:
        return np.array([Hp, 0.0])
    c = np.cbrt(H)
    Hpp = ((2.0 / 3.0) * Hp * Hp / c - 9 * H - 3 * H * c * c - 6 * c) / (1 + c * c)
    return np.array([Hp, Hpp])


def profile_operator(h, hp, hpp):
    """L h = (h'' + h)(1 + h^2) h + 2 (1 + h^2 + h'^2); zero on the profile."""
    h, hp, hpp = (np.asarray(v, dtype=float) for v in (h, hp, hpp))
    if not (h.shape == hp.shape == hpp.shape):
        raise ValueError("h, h' and h'' must have the same shape")
    return (hpp + h) * (1 + h * h) * h + 2 * (1 + h * h + hp * hp)


def ode_terms(h, hp, hpp):
    """The six terms of the profile equation, stacked along the first axis."""
    return np.stack([hpp * h, hpp * h**3, 3 * h**2, h**4, 2 * np.ones_like(h), 2 * hp**2])


def relative_residual(h, hp, hpp):
    """|sum of terms| / sum of |terms|, pointwise."""
    t = ode_terms(h, hp, hpp)
    return np.abs(t.sum(axis=0)) / np.abs(t).sum(axis=0)


def _h_second(H, Hp, Hpp):
    c = np.cbrt(H)
    return Hpp / (3 * c * c) - (2.0 / 9.0) * Hp * Hp / (H * c * c)


@dataclass(frozen=True, eq=False)
class ConeSolutionTable:
    """Tabulated cone profile; arrays are sorted in theta over (0, mu*pi)."""

    mu: float
    theta: np.ndarray
    h: np.ndarray
    h_prime: np.ndarray
    H: np.ndarray
    H_prime: np.ndarray
    a_mu: float
    a_mu_fit: float
    midpoint: float
    residual: float
    symmetry_defect: float
    theta_min: float
    rtol: float
    _spline: CubicHermiteSpline = field(repr=False)

    @property
    def grid_size(self) -> int:
        return int(self.theta.size)

    @property
    def width(self) -> float:
        return self.mu * math.pi

    def H_at(self, theta):
        """H = h^3 at theta, using the linear endpoint law inside theta_min."""
        th = np.asarray(theta, dtype=float)
        if np.any((th <= 0) | (th >= self.width)):
            raise ValueError(f"theta outside (0, {self.width:g})")
        s = np.minimum(th, self.width - th)
        inner = s < self.theta_min
        t_in = np.clip(s, self.theta_min, 0.5 * self.width)
        H = self._spline(t_in)
        H0 = self._spline(self.theta_min)
        return np.where(inner, H0 * s / self.theta_min, H)

    def Hp_at(self, theta):
        th = np.asarray(theta, dtype=float)
        if np.any((th <= 0) | (th >= self.width)):
            raise ValueError(f"theta outside (0, {self.width:g})")
        s = np.minimum(th, self.width - th)
        sign = np.where(th <= 0.5 * self.width, 1.0, -1.0)
        inner = s < self.theta_min
        t_in = np.clip(s, self.theta_min, 0.5 * self.width)
        Hp = self._spline(t_in, 1)
        Hp0 = self._spline(self.theta_min) / self.theta_min
        return sign * np.where(inner, Hp0, Hp)


def _shoot(mu, m, direction, theta_min, rtol, dense=False):
    """Integrate from the midpoint toward an endpoint; returns (H(0) estimate, sol)."""
    half = 0.5 * mu * math.pi
    end = theta_min if direction < 0 else mu * math.pi - theta_min

    def hit_zero(t, y):
        return y[0]

    hit_zero.terminal = True
    hit_zero.direction = -1
    sol = solve_ivp(profile_rhs, (half, end), [m**3, 0.0], method="DOP853",
                    rtol=rtol, atol=1e-24, events=hit_zero, dense_output=dense,
                    first_step=1e-4 * half)
    # a trajectory that reaches H = 0 early is the profile of a narrower cone;
    # the step-size collapse right at that zero counts as reaching it
    if sol.status < 0 and not sol.y[0, -1] < 1e-9 * m**3:
        raise ConeSolverError(f"integration failed for m={m:g}: {sol.message}")
    t_last = sol.t[-1]
    H_last, Hp_last = sol.y[:, -1]
    # linear extrapolation of H to the endpoint
    dist = t_last if direction < 0 else mu * math.pi - t_last
    return H_last - dist * abs(Hp_last), sol


def _fit_endpoint(theta, H, Hp):
    """Least-squares estimates of 1/H'(0) from H/theta and from H'.

    H/theta carries an extra 1/theta column that absorbs the tiny residual
    value of H at the endpoint left over from the shooting tolerance.
    """
    x = theta ** (2.0 / 3.0)
    V = np.stack([np.ones_like(x), x, x * x], axis=1)
    W = np.concatenate([V, (1.0 / theta)[:, None]], axis=1)
    c_ratio = np.linalg.lstsq(W, H / theta, rcond=None)[0]
    c_slope = np.linalg.lstsq(V, Hp, rcond=None)[0]
    return 1.0 / c_ratio[0], 1.0 / c_slope[0]


def solve_cone_profile(mu: float, tol: float = 1e-9, n_grid: int = 1500) -> ConeSolutionTable:
    """Solve the cone profile problem by symmetric shooting in H = h^3."""
    if not 0 < mu < 1:
        raise ValueError("mu must lie in (0, 1)")
    if not tol > 0:
        raise ValueError("tol must be positive")
    rtol = max(1e-4 * tol, 3e-14)
    half = 0.5 * mu * math.pi
    theta_min = THETA_MIN_FRACTION * mu * math.pi

    def f(m):
        return _shoot(mu, m, -1, theta_min, rtol)[0]

    lo, hi = 1e-3, 0.5
    while f(lo) > 0:
        lo /= 2
        if lo < 1e-12:
            raise ConeSolverError("shooting bracket not found (lower end)")
    while f(hi) < 0:
        hi *= 2
        if hi > 1e6:
            raise ConeSolverError("shooting bracket not found (upper end)")
    m = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)

    _, left = _shoot(mu, m, -1, theta_min, rtol, dense=True)
    _, right = _shoot(mu, m, +1, theta_min, rtol, dense=True)
    if left.t[-1] > theta_min * (1 + 1e-9) or right.t[-1] < mu * math.pi - theta_min * (1 + 1e-9):
        raise ConeSolverError("profile reached zero before the endpoint cutoff")

    s = np.unique(np.concatenate([np.geomspace(theta_min, half, n_grid),
                                  np.linspace(theta_min, half, n_grid)]))
    yl = left.sol(s)
    yr = right.sol(mu * math.pi - s)
    H, Hp = yl[0], yl[1]
    hl, hr = np.cbrt(yl[0]), np.cbrt(yr[0])
    symmetry = float(np.max(np.abs(hl - hr)) / np.max(hl))

    near = np.geomspace(theta_min, 1e-4 * mu * math.pi, 60)
    yn = left.sol(near)
    a_ratio, a_slope = _fit_endpoint(near, yn[0], yn[1])
    # 1/H'(0+) is the primary estimate; the H/theta fit is the cross-check

    # residual of the profile equation with h'' from differentiating H'
    probe = s[(s > 1e-6 * mu * math.pi) & (s < half * (1 - 1e-6))]
    hpp = _fd_second(left.sol, probe)
    Hq, Hpq = left.sol(probe)
    hq = np.cbrt(Hq)
    hpq = Hpq / (3 * hq * hq)
    residual = float(np.max(relative_residual(hq, hpq, _h_second(Hq, Hpq, hpp))))

    theta = np.concatenate([s, mu * math.pi - s[::-1]])
    H_full = np.concatenate([H, yr[0][::-1]])
    Hp_full = np.concatenate([Hp, yr[1][::-1]])
    keep = np.concatenate([[True], np.diff(theta) > 0])
    theta, H_full, Hp_full = theta[keep], H_full[keep], Hp_full[keep]
    h = np.cbrt(H_full)
    spline = CubicHermiteSpline(s, H, Hp)
    return ConeSolutionTable(
        mu=float(mu), theta=theta, h=h, h_prime=Hp_full / (3 * h * h), H=H_full,
        H_prime=Hp_full, a_mu=float(a_slope), a_mu_fit=float(a_ratio), midpoint=float(m),
        residual=residual, symmetry_defect=symmetry, theta_min=theta_min, rtol=rtol,
        _spline=spline,
    )


def _fd_second(dense, t):
    """H'' from fourth-order central differences of the interpolated H'."""
    eta = np.minimum(1e-3 * t, 1e-4)
    d = lambda k: dense(t + k * eta)[1]
    return (8 * (d(1) - d(-1)) - (d(2) - d(-2))) / (12 * eta)


def a_mu(table: ConeSolutionTable, rel_tol: float = 0.01) -> float:
    """Corner coefficient, after checking the two endpoint estimates agree."""
    a1, a2 = table.a_mu, table.a_mu_fit
    if not (a1 > 0 and a2 > 0):
        raise ConeSolverError("nonpositive corner coefficient")
    if abs(a1 - a2) > rel_tol * a1:
        raise ConeSolverError(f"corner coefficient estimates disagree: {a1:.8g} vs {a2:.8g}")
    return a1


def eval_profile(table: ConeSolutionTable, theta):
    """h(theta) on (0, mu*pi)."""
    return np.cbrt(table.H_at(theta))


def eval_profile_derivative(table: ConeSolutionTable, theta):
    """h'(theta) = H' / (3 H^{2/3})."""
    H = table.H_at(theta)
    c = np.cbrt(H)
    return table.Hp_at(theta) / (3 * c * c)


def eval_profile_second_derivative(table: ConeSolutionTable, theta):
    """h''(theta), solved from the profile equation itself."""
    h = eval_profile(table, theta)
    hp = eval_profile_derivative(table, theta)
    return -(3 * h**2 + h**4 + 2 + 2 * hp**2) / (h * (1 + h**2))


def eval_cone_solution(table: ConeSolutionTable, r, theta):
    """The homogeneous solution r h(theta); zero at the vertex."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be nonnegative")
    return r * eval_profile(table, theta)
