"""Explicit supersolutions of the cone profile problem and comparison constants.

With phi_k = sin(theta/mu)^{1/(1+k)} the operator

    L v = (v'' + v)(1 + v^2) v + 2 (1 + v^2 + v'^2)

is nonpositive for v = sqrt(3 mu) phi_2 when mu <= 1/3, and for
v = A (phi_alpha + C phi_beta) with large C and A when mu > 1/3.  The
existence constants are found by doubling searches and verified on an
endpoint-graded grid, then re-verified on a grid four times finer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cone import (ConeSolutionTable, eval_profile, eval_profile_derivative,
                   eval_profile_second_derivative, profile_operator)

GRID_POINTS = 10_000
SEARCH_CAP = 2.0**60
DEFAULT_ALPHA = 3.0


class CertificateError(RuntimeError):
    pass


def eval_L(mu: float, h, hp, hpp):
    """Pointwise values of the profile operator; ``mu`` is carried for the record."""
    if not 0 < mu < 1:
        raise ValueError("mu must lie in (0, 1)")
    return profile_operator(h, hp, hpp)


def graded_grid(mu: float, n: int = GRID_POINTS) -> np.ndarray:
    """Open grid on (0, mu*pi), clustered quadratically at both ends."""
    s = (np.arange(n) + 0.5) / n
    return 0.5 * mu * math.pi * (1 - np.cos(math.pi * s))


def power_sine(mu: float, k: float, theta):
    """phi = sin(theta/mu)^{1/(1+k)} with its first two derivatives."""
    theta = np.asarray(theta, dtype=float)
    S = np.sin(theta / mu)
    p = 1.0 / (1.0 + k)
    phi = S**p
    d1 = phi ** (-k) * np.cos(theta / mu) * p / mu
    d2 = -(p / mu) ** 2 * (phi + k * phi ** (-1 - 2 * k))
    return phi, d1, d2


def _g(mu, k, x):
    c = 1.0 / (mu * mu * (1 + k) ** 2)
    return (1 - c) * x - k * c * x ** (-1 - 2 * k)


@dataclass(frozen=True, eq=False)
class SupersolutionCertificate:
    mu: float
    alpha: float
    beta: float
    A: float
    B: float
    theta: np.ndarray
    L_values: np.ndarray
    fine_max: float

    def __call__(self, theta):
        return self.values(theta)[0]

    def values(self, theta):
        phi = power_sine(self.mu, self.alpha, theta)
        if self.B == 0:
            return tuple(self.A * v for v in phi)
        psi = power_sine(self.mu, self.beta, theta)
        return tuple(self.A * u + self.B * w for u, w in zip(phi, psi))

    def evaluate_L(self, theta):
        return profile_operator(*self.values(theta))

    @property
    def max_L(self) -> float:
        return float(np.max(self.L_values))


def _finish(mu, alpha, beta, A, B, n):
    theta = graded_grid(mu, n)
    cert = SupersolutionCertificate(mu, alpha, beta, A, B, theta, np.empty(0), np.nan)
    Lv = cert.evaluate_L(theta)
    fine = float(np.max(cert.evaluate_L(graded_grid(mu, 4 * n))))
    cert = SupersolutionCertificate(mu, alpha, beta, A, B, theta, Lv, fine)
    if cert.max_L > 0 or fine > 0:
        bad = theta[np.argmax(Lv)]
        raise CertificateError(f"supersolution check fails at theta={bad:.6g} (max L {max(cert.max_L, fine):.3g})")
    return cert


def certificate_small_mu(mu: float, n: int = GRID_POINTS) -> SupersolutionCertificate:
    """Certificate sqrt(3 mu) sin(theta/mu)^{1/3} for 0 < mu <= 1/3."""
    if not 0 < mu <= 1.0 / 3.0 + 1e-15:
        raise ValueError("the small-opening certificate needs 0 < mu <= 1/3")
    return _finish(mu, 2.0, 0.0, math.sqrt(3 * mu), 0.0, n)


def beta_exponent(mu: float) -> float:
    return min(0.5 * (1.0 / mu - 1.0), 0.01)


def certificate_large_mu(mu: float, alpha: float = DEFAULT_ALPHA,
                         n: int = GRID_POINTS) -> SupersolutionCertificate:
    """Certificate A (phi_alpha + C phi_beta) for 1/3 < mu < 1."""
    if not 1.0 / 3.0 < mu < 1:
        raise ValueError("the large-opening certificate needs 1/3 < mu < 1")
    if not alpha > 2:
        raise ValueError("alpha must exceed 2")
    beta = beta_exponent(mu)
    theta = graded_grid(mu, n)
    phi = power_sine(mu, alpha, theta)[0]
    psi = power_sine(mu, beta, theta)[0]
    ga, gb = _g(mu, alpha, phi), _g(mu, beta, psi)

    C = 1.0
    while np.max(ga + C * gb) >= 0:
        C *= 2
        if C > SEARCH_CAP:
            raise CertificateError(f"no C up to 2^60 makes the linear part negative (theta={theta[np.argmax(ga + C * gb)]:.6g})")
    A = 1.0
    while True:
        v = power_sine(mu, alpha, theta)
        w = power_sine(mu, beta, theta)
        Lv = profile_operator(*(A * (x + C * y) for x, y in zip(v, w)))
        if np.max(Lv) <= 0:
            break
        A *= 2
        if A > SEARCH_CAP:
            raise CertificateError(f"no A up to 2^60 works (theta={theta[np.argmax(Lv)]:.6g})")
    # the fine grid may expose aliasing; keep doubling until both grids pass
    while True:
        try:
            return _finish(mu, alpha, beta, A, A * C, n)
        except CertificateError:
            A *= 2
            if A > SEARCH_CAP:
                raise


def certificate(mu: float) -> SupersolutionCertificate:
    return certificate_small_mu(mu) if mu <= 1.0 / 3.0 else certificate_large_mu(mu)


@dataclass(frozen=True)
class ComparisonConstants:
    mu1: float
    b: float
    delta: float
    mu2: float | None = None
    C: float | None = None

    def to_dict(self) -> dict:
        return {"mu1": self.mu1, "b": self.b, "delta": self.delta, "mu2": self.mu2, "C": self.C}


def sup_grid(table: ConeSolutionTable) -> np.ndarray:
    """Table grid plus four extra points per cell in the outer tenths."""
    th = table.theta
    w = table.width
    near = (th < 0.1 * w) | (th > 0.9 * w)
    cells = np.nonzero(near[:-1] & near[1:])[0]
    frac = np.arange(1, 4) / 4.0
    extra = (th[cells, None] + frac[None, :] * np.diff(th)[cells, None]).ravel()
    return np.unique(np.concatenate([th, extra]))


def comparison_b(table: ConeSolutionTable) -> float:
    theta = sup_grid(table)
    h = eval_profile(table, theta)
    hpp = eval_profile_second_derivative(table, theta)
    den = -(hpp * h**3 + h**4)
    if np.any(den <= 0):
        raise CertificateError("nonpositive denominator -(h''h^3 + h^4): bad profile")
    return float(max(81.0 / 128.0 * np.max(h) ** 4, np.max((3 * h**2 + 2) / den)))


def comparison_constants(table: ConeSolutionTable, mu2: float | None = None) -> ComparisonConstants:
    mu1 = table.mu
    b = comparison_b(table)
    delta = (math.sqrt(1.0 / (8 * b) + 1) - 1) * mu1
    if mu2 is None:
        return ComparisonConstants(mu1, b, delta)
    if not mu1 < mu2 < mu1 + delta:
        raise ValueError(f"mu2 must lie in ({mu1:g}, {mu1 + delta:.6g})")
    C = math.sqrt(1 + b * (mu2**2 - mu1**2) / mu1**2)
    return ComparisonConstants(mu1, b, delta, float(mu2), C)


def sandwich_slack(table1: ConeSolutionTable, table2: ConeSolutionTable, C: float,
                   n: int = 4000, rel_tol: float = 1e-6):
    """Smallest slacks of h1(mu1 t) <= h2(mu2 t) <= C h1(mu1 t) over t in (0, pi).

    Slacks are relative to h2 and shifted by ``rel_tol``; nonnegative means pass.
    """
    t = graded_grid(1.0, n)
    h1 = eval_profile(table1, table1.mu * t)
    h2 = eval_profile(table2, table2.mu * t)
    lower = (h2 - h1) / h2 + rel_tol
    upper = (C * h1 - h2) / h2 + rel_tol
    return float(np.min(lower)), float(np.min(upper))


def coefficient_bounds(mu1: float, mu2: float, a1: float, C: float):
    """Interval (mu2/mu1) C^{-3} a1 <= a2 <= (mu2/mu1) a1."""
    r = mu2 / mu1
    return r * a1 / C**3, r * a1


def profile_below_certificate(table: ConeSolutionTable, cert: SupersolutionCertificate,
                              n: int = 4000) -> float:
    """min over the grid of (A phi + B psi - h); nonnegative when dominated."""
    theta = graded_grid(table.mu, n)
    return float(np.min(cert(theta) - eval_profile(table, theta)))


__all__ = [
    "CertificateError", "ComparisonConstants", "SupersolutionCertificate", "beta_exponent",
    "certificate", "certificate_large_mu", "certificate_small_mu", "coefficient_bounds",
    "comparison_b", "comparison_constants", "eval_L", "graded_grid", "power_sine",
    "profile_below_certificate", "sandwich_slack", "eval_profile_derivative",
]
