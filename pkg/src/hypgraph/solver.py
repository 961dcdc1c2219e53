"""Finite-difference solver for the hyperbolic graph Dirichlet problem.

The equation

    Delta f - f_i f_j f_ij / (1 + |grad f|^2) + n / f = 0,   f = 0 on the boundary,

is solved for u = f^m.  Multiplying through by (1 + |grad f|^2) m^3 u^{3-3/m}
gives a form without negative powers of f:

    F = (m^2 u^a + |grad u|^2) Delta u - grad u . D^2 u . grad u
        + k q u^b + n m^3 u^c,

with a = 2 - 2/m, b = 1 - 2/m, c = 3 - 4/m, k = m(1 - m) + n m, q = |grad u|^2.
With m = 2 the hemisphere w = R^2 - |x|^2 is an exact quadratic solution.

Nodes live on a uniform lattice in a parameter plane xi mapped to the domain:
the identity for Cartesian grids, log-polar coordinates around a corner, or
boundary-fitted bipolar coordinates on two-arc domains, whose two corners
are the foci.  The conformal maps may be graded toward the arcs.  Derivatives use
Shortley-Weller three-point formulas along both lattice axes and both
diagonals, with the arm to the boundary found by root-finding on the signed
distance.  The nonlinear system is solved by damped Newton with a sparse
direct factorization and a decaying positivity floor.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .cone import eval_profile, solve_cone_profile
from .geometry import ConvexCornerDomain, CornerData, GeometryError, tangent_cone

log = logging.getLogger(__name__)

# stencil slots: center, +-axis 1, +-axis 2, +-diagonal (1, 1), +-diagonal (1, -1)
SLOTS = np.array([[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [-1, -1], [1, -1], [-1, 1]])
BOUNDARY_OFFSET = 1e-9  # boundary level set used by the grid, in units of local spacing


class SolverError(RuntimeError):
    """Newton failure; carries the last residual."""

    def __init__(self, msg, residual=math.nan, diagnostics=None):
        super().__init__(msg)
        self.residual = residual
        self.diagnostics = diagnostics or {}


@lru_cache(maxsize=64)
def cone_table(mu: float):
    """Cone profile tables are reused across solves."""
    return solve_cone_profile(mu)


# --------------------------------------------------------------------------
# lattice maps


@dataclass(frozen=True)
class CartesianMap:
    spacing: float
    shift: tuple = (0.0, 0.0)
    kind: str = "cartesian"

    @property
    def steps(self):
        return self.spacing, self.spacing

    def point(self, i, j):
        i = np.asarray(i, float)
        j = np.asarray(j, float)
        return np.stack([(i + self.shift[0]) * self.spacing, (j + self.shift[1]) * self.spacing], axis=-1)

    def index_range(self, domain: ConvexCornerDomain):
        lo, hi = domain.bbox()
        s = np.asarray(self.shift)
        a = np.floor(lo / self.spacing - s).astype(int) - 1
        b = np.ceil(hi / self.spacing - s).astype(int) + 1
        return (a[0], b[0]), (a[1], b[1])

    def local_spacing(self, i, j):
        return np.full(np.shape(i), self.spacing)

    def cell_area(self, i, j):
        return np.full(np.shape(i), self.spacing**2)

    def derivative_map(self, i, j):
        """Per-node matrix taking parameter derivatives to frame derivatives."""
        M = np.zeros(np.shape(i) + (5, 5))
        M[..., range(5), range(5)] = 1.0
        return M

    def scale(self, i, j):
        return np.ones(np.shape(i))


class _ConformalLattice:
    """Lattice mapped by x = F(zeta(xi)) with F conformal.

    zeta = xi1 + i Sigma(xi1, xi2); Sigma stretches or bends the second
    coordinate (edge clustering, boundary fitting).  Frame derivatives are
    taken in the Cartesian x frame through grad_x u = J^{-T} grad_xi u and
    D^2_x u = J^{-T} (D^2_xi u - sum_k (grad_x u)_k D^2_xi x_k) J^{-1}.
    """

    def zeta_parts(self, i, j):
        """zeta, the Jacobian of (Re zeta, Im zeta) in xi, and the Hessian of Sigma."""
        raise NotImplementedError

    def zeta(self, i, j):
        return self.zeta_parts(i, j)[0]

    def F(self, z):
        raise NotImplementedError

    def dF(self, z):
        raise NotImplementedError

    def d2F(self, z):
        raise NotImplementedError

    def point(self, i, j):
        w = self.F(self.zeta(i, j))
        return np.stack([w.real, w.imag], axis=-1)

    def stretch(self, i, j):
        return np.abs(self.dF(self.zeta(i, j)))

    def local_spacing(self, i, j):
        z, S, _ = self.zeta_parts(i, j)
        a = np.linalg.norm(S[..., :, 0], axis=-1) * self.steps[0]
        b = np.linalg.norm(S[..., :, 1], axis=-1) * self.steps[1]
        return np.abs(self.dF(z)) * np.maximum(a, b)

    def cell_area(self, i, j):
        z, S, _ = self.zeta_parts(i, j)
        return np.abs(self.dF(z)) ** 2 * np.abs(np.linalg.det(S)) * self.steps[0] * self.steps[1]

    def scale(self, i, j):
        return self.stretch(i, j)

    def derivative_map(self, i, j):
        z, S, H2 = self.zeta_parts(i, j)
        d1, d2 = self.dF(z), self.d2F(z)
        Jc = np.empty(np.shape(z) + (2, 2))
        Jc[..., 0, 0], Jc[..., 0, 1] = d1.real, -d1.imag
        Jc[..., 1, 0], Jc[..., 1, 1] = d1.imag, d1.real
        # Hessians of x and y with respect to (Re zeta, Im zeta)
        Xc = np.empty(np.shape(z) + (2, 2, 2))
        Xc[..., 0, 0, 0], Xc[..., 0, 0, 1], Xc[..., 0, 1, 1] = d2.real, -d2.imag, -d2.real
        Xc[..., 1, 0, 0], Xc[..., 1, 0, 1], Xc[..., 1, 1, 1] = d2.imag, d2.real, -d2.imag
        Xc[..., :, 1, 0] = Xc[..., :, 0, 1]
        # chain rule through xi -> zeta; only Im zeta is nonlinear in xi
        J = np.einsum("...ab,...bc->...ac", Jc, S)
        X = np.einsum("...kab,...ac,...bd->...kcd", Xc, S, S)
        X = X + Jc[..., :, 1, None, None] * H2[..., None, :, :]
        Ji = np.linalg.inv(J)
        JiT = np.swapaxes(Ji, -1, -2)
        M = np.zeros(np.shape(z) + (5, 5))
        M[..., 0:2, 0:2] = JiT
        # unit parameter Hessians for the (u11, u12, u22) slots
        E = np.zeros((3, 2, 2))
        E[0, 0, 0] = 1.0
        E[1, 0, 1] = E[1, 1, 0] = 1.0
        E[2, 1, 1] = 1.0
        hs = [(0, 0), (0, 1), (1, 1)]
        for k, Ek in enumerate(E):
            Hk = np.einsum("...ab,bc,...cd->...ad", JiT, Ek, Ji)
            for p, (a, b) in enumerate(hs):
                M[..., 2 + p, 2 + k] = Hk[..., a, b]
        # first-derivative contributions through grad_x u = J^{-T} grad_xi u
        for l in range(2):
            corr = -np.einsum("...k,...kab->...ab", JiT[..., :, l], X)
            Hl = np.einsum("...ab,...bc,...cd->...ad", JiT, corr, Ji)
            for p, (a, b) in enumerate(hs):
                M[..., 2 + p, l] = Hl[..., a, b]
        return M


def _edge_stretch(eta, grading):
    """s(eta) = eta - g sin(2 pi eta) / (2 pi) on [0, 1] with s' and s''.

    With g = 1 the spacing vanishes quadratically at both ends, so a profile
    behaving like theta^(2/3) at an edge becomes smooth in eta.
    """
    c = 2 * math.pi
    s = eta - grading * np.sin(c * eta) / c
    return s, 1 - grading * np.cos(c * eta), c * grading * np.sin(c * eta)


def _parts(z, S11, S21, S22, H11, H12, H22):
    S = np.zeros(np.shape(z) + (2, 2))
    S[..., 0, 0] = S11
    S[..., 1, 0] = S21
    S[..., 1, 1] = S22
    H = np.empty(np.shape(z) + (2, 2))
    H[..., 0, 0] = H11
    H[..., 0, 1] = H[..., 1, 0] = H12
    H[..., 1, 1] = H22
    return z, S, H


@dataclass(frozen=True)
class LogPolarMap(_ConformalLattice):
    """x = vertex + e^rho (cos(theta0 + theta), sin(theta0 + theta))."""

    vertex: tuple
    theta0: float
    width: float
    d_rho: float
    n_theta: int
    rho_min: float
    grading: float = 0.0  # in [0, 1]; clusters nodes toward both edges
    kind: str = "logpolar"

    @property
    def steps(self):
        return self.d_rho, 1.0 / self.n_theta

    def radius(self, i):
        return np.exp(self.rho_min + np.asarray(i, float) * self.d_rho)

    def zeta_parts(self, i, j):
        s, ds, dds = _edge_stretch(np.asarray(j, float) / self.n_theta, self.grading)
        z = (self.rho_min + np.asarray(i, float) * self.d_rho) + 1j * self.width * s
        return _parts(z, 1.0, 0.0, self.width * ds, 0.0, 0.0, self.width * dds)

    def F(self, z):
        return complex(*self.vertex) + np.exp(z + 1j * self.theta0)

    def dF(self, z):
        return np.exp(z + 1j * self.theta0)

    d2F = dF

    def index_range(self, domain: ConvexCornerDomain):
        pts, _ = domain.boundary_samples(400)
        rmax = np.max(np.linalg.norm(pts - np.asarray(self.vertex), axis=-1))
        imax = int(math.ceil((math.log(rmax) - self.rho_min) / self.d_rho)) + 1
        return (0, imax), (0, self.n_theta)

    def fixed_mask(self, I, J, i_range):
        return I == i_range[0]


class ArcAngle:
    """Bipolar angle sigma(tau) of a boundary arc running between the two foci.

    In the coordinates zeta = log((x - x0) / (q - x)) an arc joining x0 and q
    is a curve sigma(tau); circles through both foci are lines sigma = const.
    """

    def __init__(self, arc, x0, q, reverse: bool):
        self.arc = arc
        self.x0 = complex(*x0)
        self.q = complex(*q)
        self.reverse = reverse
        s = np.linspace(arc.s_start, arc.s_end, 4001)[1:-1]
        z, dz, _ = self._zeta(s)
        self.constant = None
        self._cache = {}
        if np.ptp(z.imag) < 1e-12:
            self.constant = float(np.median(z.imag))
            return
        dtau = dz.real * (-1 if reverse else 1)
        if not np.all(dtau > 0):
            raise GeometryError("arc is not monotone in the bipolar coordinate")

    def _zeta(self, s):
        p = self.arc.point(s)
        d1 = self.arc.d1(s)
        d2 = self.arc.d2(s)
        E = p[..., 0] + 1j * p[..., 1]
        E1 = d1[..., 0] + 1j * d1[..., 1]
        E2 = d2[..., 0] + 1j * d2[..., 1]
        a, b = E - self.x0, self.q - E
        z = np.log(a / b)
        dz = E1 / a + E1 / b
        ddz = E2 / a - (E1 / a) ** 2 + E2 / b + (E1 / b) ** 2
        return z, dz, ddz

    def __call__(self, tau):
        """sigma, d sigma / d tau and d^2 sigma / d tau^2 at the given tau."""
        tau = np.asarray(tau, float)
        if self.constant is not None:
            return np.full(tau.shape, self.constant), np.zeros(tau.shape), np.zeros(tau.shape)
        # lattice rows repeat the same tau values many times; solve each once
        uniq, inv = np.unique(tau, return_inverse=True)
        missing = np.array([t for t in uniq if t not in self._cache])
        if len(missing):
            for t, v in zip(missing, np.stack(self._solve(missing), axis=-1)):
                self._cache[t] = v
        vals = np.array([self._cache[t] for t in uniq]).reshape(-1, 3)[inv.ravel()]
        return tuple(vals[:, k].reshape(tau.shape) for k in range(3))

    def _solve(self, tau):
        lo = np.full(tau.shape, self.arc.s_start)
        hi = np.full(tau.shape, self.arc.s_end)
        sign = -1.0 if self.reverse else 1.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            up = sign * self._zeta(mid)[0].real < sign * tau
            lo = np.where(up, mid, lo)
            hi = np.where(up, hi, mid)
            if np.all(hi - lo <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(mid))):
                break
        z, dz, ddz = self._zeta(0.5 * (lo + hi))
        ds = dz.imag / dz.real
        dds = (ddz.imag * dz.real - dz.imag * ddz.real) / dz.real**3
        return z.imag, ds, dds


@dataclass(frozen=True, eq=False)
class BipolarMap(_ConformalLattice):
    """Boundary-fitted strip coordinates of a two-corner domain.

    x = x0 + e^{i phi} 2L e^zeta / (1 + e^zeta) sends the line Re zeta = tau
    to a circle separating the foci x0 and q = x0 + 2L e^{i phi}; tau -> -inf
    at x0 and +inf at q.  Sigma interpolates between the bipolar angles of
    the two arcs, so both arcs are lattice lines.
    """

    vertex: tuple
    phi: float
    L: float
    low: ArcAngle
    high: ArcAngle
    d_tau: float
    n_sigma: int
    tau_min: float
    tau_max: float
    grading: float = 0.0
    kind: str = "bipolar"
    boundary_fitted: bool = True

    @property
    def steps(self):
        return self.d_tau, 1.0 / self.n_sigma

    @property
    def n_tau(self):
        return int(round((self.tau_max - self.tau_min) / self.d_tau))

    def zeta_parts(self, i, j):
        tau = self.tau_min + np.asarray(i, float) * self.d_tau
        tau, eta = np.broadcast_arrays(tau, np.asarray(j, float) / self.n_sigma)
        a, a1, a2 = self.low(tau)
        b, b1, b2 = self.high(tau)
        s, ds, dds = _edge_stretch(eta, self.grading)
        w, w1, w2 = b - a, b1 - a1, b2 - a2
        z = tau + 1j * (a + w * s)
        return _parts(z, 1.0, a1 + w1 * s, w * ds, a2 + w2 * s, w1 * ds, w * dds)

    def F(self, z):
        rot = 2 * self.L * np.exp(1j * self.phi)
        # e^z / (1 + e^z) evaluated without overflow on either end
        frac = np.where(z.real < 0, np.exp(z) / (1 + np.exp(z)), 1 / (1 + np.exp(-z)))
        return complex(*self.vertex) + rot * frac

    def dF(self, z):
        rot = 2 * self.L * np.exp(1j * self.phi)
        # e^z / (1 + e^z)^2 is even under z -> -z
        ez = np.exp(np.where(z.real < 0, z, -z))
        return rot * ez / (1 + ez) ** 2

    def d2F(self, z):
        rot = 2 * self.L * np.exp(1j * self.phi)
        ez = np.exp(np.where(z.real < 0, z, -z))
        sign = np.where(z.real < 0, 1.0, -1.0)
        return sign * rot * ez * (1 - ez) / (1 + ez) ** 3

    def index_range(self, domain: ConvexCornerDomain):
        return (0, self.n_tau), (0, self.n_sigma)

    def fixed_mask(self, I, J, i_range):
        return (I == i_range[0]) | (I == i_range[1])


@dataclass(frozen=True)
class EllipticMap(_ConformalLattice):
    """Boundary-fitted elliptic coordinates x = center + e^{i phi} c cos(zeta).

    zeta = theta + i s with theta in (0, pi) and s in (-s0, s0) covers the
    ellipse with semi-axes (c cosh s0, c sinh s0) once; both halves of the
    ellipse are the lattice lines s = -s0 and s = s0.  The map folds along
    the major axis outside the foci, so the lattice continues across
    theta = 0 and theta = pi by (theta, s) -> (-theta, -s).  Nodes sit at
    half-integer theta steps, which keeps them off the foci.
    """

    center: tuple
    phi: float
    c: float
    s0: float
    n_theta: int
    n_s: int
    grading: float = 0.0
    kind: str = "elliptic"
    boundary_fitted: bool = True

    @property
    def steps(self):
        return math.pi / self.n_theta, 1.0 / self.n_s

    def zeta_parts(self, i, j):
        theta = (np.asarray(i, float) + 0.5) * (math.pi / self.n_theta)
        theta, eta = np.broadcast_arrays(theta, np.asarray(j, float) / self.n_s)
        s, ds, dds = _edge_stretch(eta, self.grading)
        z = theta + 1j * self.s0 * (2 * s - 1)
        return _parts(z, 1.0, 0.0, 2 * self.s0 * ds, 0.0, 0.0, 2 * self.s0 * dds)

    def F(self, z):
        return complex(*self.center) + self.c * np.exp(1j * self.phi) * np.cos(z)

    def dF(self, z):
        return -self.c * np.exp(1j * self.phi) * np.sin(z)

    def d2F(self, z):
        return -self.c * np.exp(1j * self.phi) * np.cos(z)

    def index_range(self, domain: ConvexCornerDomain):
        return (0, self.n_theta - 1), (0, self.n_s)

    def wrap(self, i, j):
        """Lattice indices continued across theta = 0 and theta = pi."""
        out = (i < 0) | (i >= self.n_theta)
        i = np.where(i < 0, -1 - i, np.where(i >= self.n_theta, 2 * self.n_theta - 1 - i, i))
        return i, np.where(out, self.n_s - j, j)


# --------------------------------------------------------------------------
# grids


@dataclass(eq=False)
class GradedGrid:
    """Active nodes of a mapped lattice with their cut stencils."""

    domain: ConvexCornerDomain
    map: object
    ij: np.ndarray  # (n, 2) integer lattice indices
    x: np.ndarray  # (n, 2) physical coordinates
    d: np.ndarray  # signed distance to the boundary
    neighbors: np.ndarray  # (n, 9) node index, or -1 for a boundary point
    arms: np.ndarray  # (n, 9) arm fraction in (0, 1]
    fixed: np.ndarray  # bool mask of Dirichlet nodes
    fixed_values: np.ndarray  # f values at fixed nodes
    weights: np.ndarray = field(default=None, repr=False)  # (5, n, 9) frame-derivative weights

    @property
    def size(self) -> int:
        return len(self.x)

    @property
    def spacing(self) -> np.ndarray:
        return self.map.local_spacing(self.ij[:, 0], self.ij[:, 1])

    @property
    def cut(self) -> np.ndarray:
        return np.any(self.neighbors[:, 1:5] < 0, axis=1)

    def classification(self) -> np.ndarray:
        """'interior' or 'cut' per active node (exterior nodes are not stored)."""
        return np.where(self.cut, "cut", "interior")


def _cross_fraction(sdf, map_, i0, j0, di, dj, level, iters=60):
    """Fraction s in (0, 1] where sdf(point(i0 + s di, j0 + s dj)) hits ``level``."""
    a = np.zeros(len(i0))
    b = np.ones(len(i0))
    fa = sdf(map_.point(i0, j0)) - level
    fb = sdf(map_.point(i0 + di, j0 + dj)) - level
    side = np.zeros(len(i0), dtype=int)
    for _ in range(iters):
        t = (a * fb - b * fa) / (fb - fa)
        t = np.where((t > a) & (t < b), t, 0.5 * (a + b))
        ft = sdf(map_.point(i0 + t * di, j0 + t * dj)) - level
        pos = ft > 0
        a, fa_new = np.where(pos, t, a), np.where(pos, ft, np.where(side == -1, 0.5 * fa, fa))
        b, fb_new = np.where(pos, b, t), np.where(pos, np.where(side == 1, 0.5 * fb, fb), ft)
        side = np.where(pos, 1, -1)
        fa, fb = fa_new, fb_new
        if np.all(b - a < 1e-13):
            break
    return np.clip(b, 1e-12, 1.0)


def build_grid(domain: ConvexCornerDomain, spacing: float | None = None, shift=(0.0, 0.0),
               map_=None, fixed_value=None) -> GradedGrid:
    """Classify lattice nodes and compute Shortley-Weller arms.

    ``map_`` defaults to a Cartesian lattice of the given spacing anchored at
    ``shift * spacing``.  With ``fixed_value`` the end rows selected by the
    map's ``fixed_mask`` become Dirichlet nodes with f = ``fixed_value(x)``.
    """
    if map_ is None:
        if spacing is None or not spacing > 0:
            raise ValueError("spacing must be positive")
        feature = min(a.min_radius() for a in domain.arcs)
        if spacing > feature / 10:
            raise GeometryError(f"spacing {spacing:g} too coarse for feature size {feature:g}")
        map_ = CartesianMap(float(spacing), tuple(float(s) for s in shift))
    (i0, i1), (j0, j1) = map_.index_range(domain)
    I, J = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1), indexing="ij")
    I, J = I.ravel(), J.ravel()
    X = map_.point(I, J)
    sdf = domain.signed_distance
    D = sdf(X)
    # nodes within rounding of the boundary count as boundary points
    level_all = np.maximum(BOUNDARY_OFFSET * map_.local_spacing(I, J), 64 * np.finfo(float).eps * domain.diameter())
    active = D > level_all
    fitted = getattr(map_, "boundary_fitted", False)
    if fitted:
        # the first and last lattice lines of axis 2 are the boundary arcs
        active &= (J > j0) & (J < j1)
    I, J, X, D = I[active], J[active], X[active], D[active]
    level = level_all[active]
    n = len(I)
    if n == 0:
        raise GeometryError("no lattice node inside the domain")
    ni, nj = i1 - i0 + 3, j1 - j0 + 3
    key = (I - i0 + 1) * nj + (J - j0 + 1)
    table = -np.ones(ni * nj, dtype=np.int64)
    table[key] = np.arange(n)
    nbr = np.empty((n, 9), dtype=np.int64)
    arms = np.ones((n, 9))
    fixed = np.zeros(n, dtype=bool)
    if fixed_value is not None:
        fixed = map_.fixed_mask(I, J, (i0, i1))
    wrap = getattr(map_, "wrap", None)
    for s, (di, dj) in enumerate(SLOTS):
        ii, jj = I + di, J + dj
        if wrap is not None:
            ii, jj = wrap(ii, jj)
        inside = (ii >= i0) & (ii <= i1) & (jj >= j0) & (jj <= j1)
        idx = np.full(n, -1, dtype=np.int64)
        k = (ii[inside] - i0 + 1) * nj + (jj[inside] - j0 + 1)
        idx[inside] = table[k]
        nbr[:, s] = idx
        lost = (idx < 0) & ~fixed
        if fitted:
            lost &= ~np.isin(jj, (j0, j1))
        miss = np.nonzero(lost)[0]
        if s > 0 and len(miss):
            arms[miss, s] = _cross_fraction(sdf, map_, I[miss].astype(float), J[miss].astype(float),
                                            di, dj, level[miss])
    fvals = np.zeros(n)
    if fixed_value is not None:
        if np.any(fixed):
            fvals[fixed] = fixed_value(X[fixed])
    grid = GradedGrid(domain, map_, np.column_stack([I, J]), X, D, nbr, arms, fixed, fvals)
    grid.weights = _frame_weights(grid)
    return grid


def _frame_weights(grid: GradedGrid) -> np.ndarray:
    """Weights W[P, node, slot] giving frame derivatives P from nodal values."""
    n = grid.size
    A = grid.arms
    d1, d2 = grid.map.steps
    W = np.zeros((5, n, 9))

    def first(p, m, delta):
        a, b = A[:, p], A[:, m]
        den = a * b * (a + b) * delta
        return b * b / den, (a * a - b * b) / den, -a * a / den

    def second(p, m):
        a, b = A[:, p], A[:, m]
        return 2 / (a * (a + b)), -2 / (a * b), 2 / (b * (a + b))

    wp, w0, wm = first(1, 2, d1)
    W[0, :, 1], W[0, :, 0], W[0, :, 2] = wp, w0, wm
    wp, w0, wm = first(3, 4, d2)
    W[1, :, 3], W[1, :, 0], W[1, :, 4] = wp, w0, wm
    wp, w0, wm = second(1, 2)
    W[2, :, 1], W[2, :, 0], W[2, :, 2] = wp / d1**2, w0 / d1**2, wm / d1**2
    wp, w0, wm = second(3, 4)
    W[4, :, 3], W[4, :, 0], W[4, :, 4] = wp / d2**2, w0 / d2**2, wm / d2**2
    # mixed derivative from the difference of the two diagonal second derivatives
    s1p, s10, s1m = second(5, 6)
    s2p, s20, s2m = second(7, 8)
    c = 1.0 / (4 * d1 * d2)
    W[3, :, 5], W[3, :, 6], W[3, :, 7], W[3, :, 8] = c * s1p, c * s1m, -c * s2p, -c * s2m
    W[3, :, 0] = c * (s10 - s20)
    M = grid.map.derivative_map(grid.ij[:, 0], grid.ij[:, 1])
    return np.einsum("npd,dns->pns", M, W)


# --------------------------------------------------------------------------
# residual


@dataclass(frozen=True)
class SolverConfig:
    spacing: float = 1.0 / 64
    m: int = 2
    n: int = 2
    tol: float = 1e-10
    max_iter: int = 60
    eps0: float = 1e-2
    eps_decay: float = 0.1
    min_damping: float = 1.0 / 1024
    shift: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not (0 < self.eps_decay < 1 and self.eps0 > 0):
            raise ValueError("continuation floor must decay to zero")
        if self.m < 1:
            raise ValueError("power m must be at least 1")


def _gather(grid: GradedGrid, u):
    padded = np.append(u, 0.0)
    return padded[np.where(grid.neighbors < 0, len(u), grid.neighbors)]


def frame_derivatives(grid: GradedGrid, u):
    """(g1, g2, H11, H12, H22) in the local orthonormal frame."""
    vals = _gather(grid, u)
    return np.einsum("pns,ns->pn", grid.weights, vals)


def _exponents(m, n):
    return 2 - 2 / m, 1 - 2 / m, 3 - 4 / m, m * (1 - m) + n * m


def residual_terms(grid: GradedGrid, u, m: int, n: int):
    """Residual F per node and the sum of the absolute values of its terms."""
    g1, g2, H11, H12, H22 = frame_derivatives(grid, u)
    a, b, c, k = _exponents(m, n)
    up = np.maximum(u, 0.0)
    q = g1 * g1 + g2 * g2
    lap = H11 + H22
    Q = g1 * g1 * H11 + 2 * g1 * g2 * H12 + g2 * g2 * H22
    t1 = (m * m * up**a + q) * lap
    t3 = k * q * up**b
    t4 = n * m**3 * up**c
    F = t1 - Q + t3 + t4
    return F, np.abs(t1) + np.abs(Q) + np.abs(t3) + np.abs(t4)


def _jacobian(grid: GradedGrid, u, m, n):
    g1, g2, H11, H12, H22 = frame_derivatives(grid, u)
    a, b, c, k = _exponents(m, n)
    q = g1 * g1 + g2 * g2
    lap = H11 + H22
    ua = u**a
    dH11 = m * m * ua + q - g1 * g1
    dH22 = m * m * ua + q - g2 * g2
    dH12 = -2 * g1 * g2
    dg1 = 2 * g1 * lap - 2 * (g1 * H11 + g2 * H12) + 2 * k * g1 * u**b
    dg2 = 2 * g2 * lap - 2 * (g1 * H12 + g2 * H22) + 2 * k * g2 * u**b
    du = n * m**3 * c * u ** (c - 1)
    if a != 0:
        du = du + a * m * m * u ** (a - 1) * lap
    if b != 0 and k != 0:
        du = du + k * b * q * u ** (b - 1)
    coef = np.stack([dg1, dg2, dH11, dH12, dH22])
    vals = np.einsum("pn,pns->ns", coef, grid.weights)
    vals[:, 0] += du
    N = grid.size
    rows = np.repeat(np.arange(N), 9)
    cols = grid.neighbors.ravel()
    data = vals.ravel()
    keep = cols >= 0
    return sp.csr_matrix((data[keep], (rows[keep], cols[keep])), shape=(N, N))


# --------------------------------------------------------------------------
# initial guess and energy


def initial_guess(grid: GradedGrid, corner_tables=None):
    """Upper-envelope style guess: osculating hemispheres, corner cones, Holder cap."""
    dom = grid.domain
    x, d = grid.x, np.maximum(grid.d, 0.0)
    kappa = np.maximum(dom.boundary_curvature_at_foot(x), 1e-12)
    rho = 1 / kappa
    dd = np.minimum(d, rho)
    f = np.sqrt(dd * (2 * rho - dd))
    f = np.minimum(f, (3 * dom.diameter() ** 2) ** (1 / 3) * d ** (1 / 3))
    for c in dom.corners:
        table = (corner_tables or {}).get(c.mu) or cone_table(round(c.mu, 12))
        cone = tangent_cone(c)
        r, th = cone.polar(x)
        ok = (th > 0) & (th < table.width)
        fc = np.full(len(x), np.inf)
        fc[ok] = r[ok] * eval_profile(table, th[ok])
        f = np.minimum(f, fc)
    return f


def energy_density(grid: GradedGrid, u, m: int, n: int):
    g1, g2 = frame_derivatives(grid, u)[:2]
    f = np.maximum(u, 1e-300) ** (1 / m)
    grad_f = np.hypot(g1, g2) * f / (m * np.maximum(u, 1e-300))
    return f ** (-n) * np.sqrt(1 + grad_f**2)


def truncation_weights(grid: GradedGrid, dcut=None):
    """Smoothed indicator of d > dcut (default five local spacings)."""
    h = grid.spacing
    if dcut is None:
        dcut = 5 * h
    return np.clip((grid.d - dcut) / h + 0.5, 0.0, 1.0)


def energy_of(grid: GradedGrid, u, m: int, n: int, dcut=None):
    """Truncated hyperbolic area of the graph."""
    wgt = truncation_weights(grid, dcut)
    if np.any((u <= 0) & (wgt > 0)):
        raise SolverError("nonpositive field inside the energy window")
    area = grid.map.cell_area(grid.ij[:, 0], grid.ij[:, 1])
    return float(np.sum(wgt * energy_density(grid, u, m, n) * area))


# --------------------------------------------------------------------------
# fields and Newton


@dataclass(eq=False)
class ScalarField:
    grid: GradedGrid
    u: np.ndarray
    m: int
    n: int
    iterations: int = 0
    residual: float = math.nan
    residual_history: list = field(default_factory=list)
    energy_history: list = field(default_factory=list)
    converged: bool = False

    @property
    def f(self) -> np.ndarray:
        return np.maximum(self.u, 0.0) ** (1.0 / self.m)

    @property
    def w(self) -> np.ndarray:
        return self.f**2

    @property
    def x(self):
        return self.grid.x

    @property
    def d(self):
        return self.grid.d

    def with_f(self, f) -> "ScalarField":
        return ScalarField(self.grid, np.asarray(f, float) ** self.m, self.m, self.n)


def _scales(grid, m):
    s = grid.map.scale(grid.ij[:, 0], grid.ij[:, 1])
    return s ** m, s ** (-(3 * m - 4))


def relative_residual(grid: GradedGrid, u, m: int, n: int):
    """|F| divided by the sum of the magnitudes of its terms, per free node."""
    F, mag = residual_terms(grid, u, m, n)
    rel = np.abs(F) / np.maximum(mag, 1e-300)
    return np.where(grid.fixed, 0.0, rel)


def newton_solve(grid: GradedGrid, u0, m: int = 2, n: int = 2, tol: float = 1e-10,
                 max_iter: int = 60, eps0: float = 1e-2, eps_decay: float = 0.1,
                 min_damping: float = 1.0 / 1024, track_energy: bool = True) -> ScalarField:
    """Damped Newton on G = F / u^c.

    u = 0 solves F = 0 identically, and plain Newton on F drifts toward it.
    Dividing each row by the power of u in the source term removes that root
    without changing the positive solutions, and makes G invariant under
    dilations of the domain.  Each node may shrink at most tenfold per step,
    u is held above a floor that decays geometrically, and the damping is
    halved until the max-norm or the 2-norm of G drops.
    """
    _, _, c, _ = _exponents(m, n)
    col, _ = _scales(grid, m)
    fixed = grid.fixed
    free = ~fixed
    fixed_u = np.where(fixed, grid.fixed_values**m, 0.0)
    u = np.where(fixed, fixed_u, np.asarray(u0, float))
    if np.any(u[free] <= 0):
        raise SolverError("initial guess must be positive at free nodes")
    length = grid.map.scale(grid.ij[:, 0], grid.ij[:, 1])
    if grid.map.kind == "cartesian":
        length = length * np.max(u) ** (1 / m)
    hist, ehist = [], []

    def merit(v):
        F, _ = residual_terms(grid, v, m, n)
        return np.where(fixed, (v - fixed_u) / col, F / v**c)

    R = merit(u)
    rel = float(np.max(relative_residual(grid, u, m, n)))
    hist.append(rel)
    lam = 1.0
    for it in range(max_iter):
        if rel < tol:
            break
        F, _ = residual_terms(grid, u, m, n)
        J = sp.diags(np.where(fixed, 0.0, u**-c)) @ _jacobian(grid, u, m, n)
        J = J - sp.diags(np.where(fixed, 0.0, c * F * u ** (-c - 1)))
        J = (J @ sp.diags(col)).tocsr()
        J = J + sp.diags(np.where(fixed, 1.0, 0.0))
        step = spsolve(J.tocsc(), -R) * col
        if not np.all(np.isfinite(step)):
            raise SolverError("singular Newton system", residual=rel,
                              diagnostics={"residual_history": hist})
        lam = 1.0
        floor = np.where(fixed, fixed_u, np.maximum((eps0 * eps_decay**it * length) ** m, 0.1 * u))
        inf0, two0 = np.max(np.abs(R)), np.linalg.norm(R)
        while True:
            trial = np.maximum(u + lam * step, floor)
            Rt = merit(trial)
            # accept a sufficient decrease in either the max norm or the 2-norm
            cut = 1 - 1e-4 * lam
            if (np.max(np.abs(Rt)) < cut * inf0 or np.linalg.norm(Rt) < cut * two0
                    or lam <= min_damping):
                break
            lam *= 0.5
        u, R = trial, Rt
        rel = float(np.max(relative_residual(grid, u, m, n)))
        hist.append(rel)
        if track_energy:
            try:
                ehist.append(energy_of(grid, u, m, n))
            except SolverError:
                ehist.append(math.nan)
        log.debug("newton %d: damping %.3g, relative residual %.3e", it, lam, rel)
        if lam == 1.0 and np.max(np.abs(step)) <= 1e-15 * np.max(np.abs(u)):
            break
    fld = ScalarField(grid, u, m, n, len(hist) - 1, rel, hist, ehist, rel < tol)
    if not fld.converged:
        raise SolverError(f"Newton did not converge: relative residual {rel:.3e} after {fld.iterations} steps",
                          residual=rel, diagnostics={"residual_history": hist, "last_iterate": u})
    return fld


def solve(domain: ConvexCornerDomain, config: SolverConfig = SolverConfig(), grid: GradedGrid | None = None,
          guess=None) -> ScalarField:
    """Solve on a Cartesian grid (or a supplied grid) and return the field."""
    if grid is None:
        grid = build_grid(domain, config.spacing, config.shift)
    f0 = initial_guess(grid) if guess is None else np.asarray(guess, float)
    return newton_solve(grid, np.maximum(f0, 1e-12) ** config.m, config.m, config.n, config.tol,
                        config.max_iter, config.eps0, config.eps_decay, config.min_damping)


def build_corner_grid(domain: ConvexCornerDomain, corner: CornerData, d_rho: float = 0.02,
                      n_theta: int = 80, r_min: float = 1e-6, grading: float = 0.0, table=None,
                      shift: float = 0.0) -> GradedGrid:
    """Log-polar lattice around a corner with cone data on the innermost row."""
    cone = tangent_cone(corner)
    e1 = cone.edge1
    theta0 = math.atan2(e1[1], e1[0])
    width = corner.mu * math.pi
    map_ = LogPolarMap(tuple(corner.vertex), theta0, width, d_rho, n_theta,
                       math.log(r_min) + shift * d_rho, grading)
    table = table if table is not None else cone_table(round(corner.mu, 12))

    return build_grid(domain, map_=map_, fixed_value=_cone_values(corner, table))


def _cone_values(corner: CornerData, table):
    cone = tangent_cone(corner)

    def values(x):
        r, th = cone.polar(x)
        return r * eval_profile(table, np.clip(th, 1e-300, table.width * (1 - 1e-16)))

    return values


def build_lens_grid(domain: ConvexCornerDomain, d_tau: float = 0.02, n_sigma: int = 80,
                    r_min: float = 1e-5, grading: float = 1.0, shift: float = 0.0) -> GradedGrid:
    """Boundary-fitted bipolar lattice of a two-arc domain.

    The two corners are the foci; both arcs are lattice lines, and the rows
    at distance ~ r_min from each corner carry that corner's cone data.
    ``shift`` moves the rows by that fraction of d_tau; lattices with d_tau
    and d_tau/2 are nested when the shift is given in absolute units, so the
    finer one should use twice the fraction.
    """
    if len(domain.corners) != 2 or len(domain.arcs) != 2:
        raise GeometryError("bipolar grids need a domain with two arcs and two corners")
    c0, c1 = domain.corners
    if c0.arc1 != 0:
        raise GeometryError("the first corner must start the first arc")
    x0, q = np.asarray(c0.vertex), np.asarray(c1.vertex)
    L = 0.5 * float(np.linalg.norm(q - x0))
    phi = math.atan2(*(q - x0)[::-1])
    low = ArcAngle(domain.arcs[0], x0, q, reverse=False)
    high = ArcAngle(domain.arcs[1], x0, q, reverse=True)
    tau = d_tau * math.ceil(math.log(2 * L / r_min) / d_tau)
    if not np.all(high(np.linspace(-tau, tau, 9))[0] > low(np.linspace(-tau, tau, 9))[0]):
        raise GeometryError("arcs are not ordered by bipolar angle")
    off = shift * d_tau
    map_ = BipolarMap(tuple(x0), phi, L, low, high, d_tau, n_sigma, -tau + off, tau + off, grading)
    near0 = _cone_values(c0, cone_table(round(c0.mu, 12)))
    near1 = _cone_values(c1, cone_table(round(c1.mu, 12)))

    def values(x):
        first = np.linalg.norm(x - x0, axis=-1) < L
        out = np.empty(len(x))
        out[first] = near0(x[first])
        out[~first] = near1(x[~first])
        return out

    return build_grid(domain, map_=map_, fixed_value=values)


def solve_lens(domain: ConvexCornerDomain, d_tau: float = 0.02, n_sigma: int = 80,
               r_min: float = 1e-5, grading: float = 1.0, m: int = 2, tol: float = 1e-10,
               max_iter: int = 60, shift: float = 0.0) -> ScalarField:
    grid = build_lens_grid(domain, d_tau, n_sigma, r_min, grading, shift)
    f0 = np.where(grid.fixed, grid.fixed_values, initial_guess(grid))
    return newton_solve(grid, np.maximum(f0, 1e-300) ** m, m, 2, tol, max_iter)


def build_ellipse_grid(domain: ConvexCornerDomain, n_theta: int = 160, n_s: int = 80,
                       grading: float = 0.95) -> GradedGrid:
    """Boundary-fitted elliptic lattice of a domain bounded by one full ellipse.

    Full grading (1.0) stalls Newton near the major vertices; 0.95 is the default.
    """
    if len(domain.arcs) != 1 or getattr(domain.arcs[0], "kind", "") != "ellipse":
        raise GeometryError("elliptic grids need a domain bounded by a single ellipse")
    params = domain.arcs[0].to_dict()
    a, b = params["semi_axes"]
    phi = params["rotation"]
    if b > a:
        a, b, phi = b, a, phi + 0.5 * math.pi
    if not a > b * (1 + 1e-9):
        raise GeometryError("elliptic coordinates degenerate on a circle")
    if n_s % 2:
        raise ValueError("n_s must be even")
    c = math.sqrt(a * a - b * b)
    map_ = EllipticMap(tuple(params["center"]), phi, c, math.atanh(b / a), n_theta, n_s, grading)
    return build_grid(domain, map_=map_)


def solve_ellipse(domain: ConvexCornerDomain, n_theta: int = 160, n_s: int = 80, grading: float = 0.95,
                  m: int = 2, tol: float = 1e-10, max_iter: int = 60) -> ScalarField:
    grid = build_ellipse_grid(domain, n_theta, n_s, grading)
    return newton_solve(grid, np.maximum(initial_guess(grid), 1e-300) ** m, m, 2, tol, max_iter)


def solve_corner(domain: ConvexCornerDomain, corner: CornerData, d_rho: float = 0.02,
                 n_theta: int = 80, r_min: float = 1e-6, grading: float = 0.0, m: int = 2,
                 tol: float = 1e-10, max_iter: int = 60, shift: float = 0.0) -> ScalarField:
    grid = build_corner_grid(domain, corner, d_rho, n_theta, r_min, grading, shift=shift)
    f0 = initial_guess(grid)
    f0 = np.where(grid.fixed, grid.fixed_values, f0)
    return newton_solve(grid, np.maximum(f0, 1e-300) ** m, m, 2, tol, max_iter)


# --------------------------------------------------------------------------
# diagnostics


def pde_residual(field: ScalarField):
    """Residual report: u-form max, relative max, and f-form residual away from the boundary."""
    grid = field.grid
    F, _ = residual_terms(grid, field.u, field.m, field.n)
    free = ~grid.fixed
    rel = relative_residual(grid, field.u, field.m, field.n)
    ff = f_form_residual(field)
    h = grid.spacing
    far = free & (grid.d > 10 * h)
    return {
        "u_form_max": float(np.max(np.abs(F[free]))),
        "relative_max": float(np.max(rel[free])),
        "f_weighted_max": float(np.max(np.abs(ff[free] * field.f[free]))),
        "f_form_far_max": float(np.max(np.abs(ff[far]))) if np.any(far) else math.nan,
    }


def f_form_residual(field: ScalarField):
    """Delta f - f_i f_j f_ij / (1 + |grad f|^2) + n/f from the u-form residual."""
    m, n = field.m, field.n
    u = np.maximum(field.u, 1e-300)
    F, _ = residual_terms(field.grid, field.u, m, n)
    g1, g2 = frame_derivatives(field.grid, field.u)[:2]
    f = u ** (1 / m)
    grad_f2 = (g1 * g1 + g2 * g2) * (f / (m * u)) ** 2
    # F = m^3 u^{3 - 3/m} (1 + |grad f|^2) * (f-form residual)
    return F / (m**3 * u ** (3 - 3 / m) * (1 + grad_f2))


def energy(field: ScalarField, dcut=None) -> float:
    return energy_of(field.grid, field.u, field.m, field.n, dcut)
