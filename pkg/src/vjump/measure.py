"""Velocity measures with compact support and their resolvent integrals.

A velocity measure M is a probability measure on R^n with bounded support V
whose convex hull contains the origin in its interior.  Everything downstream
needs only a handful of integrals of M against rational functions of v.p:

    mu(p)        = max { v.p : v in Conv(V) }                (support function)
    I_sing(p)    = int M(v) / (mu(p) - v.p) dv               (singular integral)
    F(h; p)      = int M(v) / (1 + h - v.p) dv               (resolvent)
    m_k(h; p)    = int M(v) v^k / (1 + h - v.p)^2 dv, k=0,1  (moments)

For every shipped kind these reduce to one-dimensional integrals along the
direction of p, and the reduced integrals are evaluated in closed form:
logarithms for intervals, a two-term recursion of complete integrals for
uniform balls, finite sums for atomic measures, and exact per-segment
antiderivatives of a piecewise-linear projected kernel for tabulated radial
densities.  Naive quadrature against the near-pole integrand is never used;
it cannot reach the accuracy the implicit Hamiltonian solve requires.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

from .errors import ConfigError, DenominatorNotPositive, ZeroMomentum

DEFAULT_QUADRATURE_ORDER = 200

# Tail convention for tabulated kinds: singular integrals larger than this
# are reported as divergent.
SINGULAR_INTEGRAL_CAP = 1e6

_TAB_KERNEL_NODES = 2049      # projected-kernel sampling for tabulated kinds
_TAB_INNER_ORDER = 64         # inner quadrature for the projection integral
_TAB_CHUNK = 256              # momentum rows per vectorized kernel sweep


def _sphere_area(n: int) -> float:
    # surface measure of the unit sphere S^{n-1}
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


def _slab_mass(n: int) -> float:
    # B_n = int_{-1}^{1} (1 - u^2)^{(n-1)/2} du
    return math.sqrt(math.pi) * math.gamma((n + 1) / 2.0) / math.gamma(n / 2.0 + 1.0)


def _unit_directions(n: int, extra: int = 48) -> np.ndarray:
    """Deterministic direction sample: coordinate axes plus fixed pseudorandom
    points on the sphere.  Used for interior checks and hull certificates."""
    if n == 1:
        return np.array([[1.0], [-1.0]])
    eye = np.eye(n)
    dirs = [eye, -eye]
    rng = np.random.Generator(np.random.Philox(key=0x9E3779B97F4A7C15))
    g = rng.standard_normal((extra, n))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    dirs.append(g)
    return np.vstack(dirs)


@dataclass(frozen=True)
class SupportQuery:
    """Support function value and maximizer data at one momentum.

    maximizers holds a finite representation of the maximizing face: a single
    point when the face is a vertex, the tied extreme points for atomic
    measures, and an empty array when the face is a continuum (only possible
    in the degenerate p = 0 case of rotationally invariant kinds).
    """

    p: np.ndarray
    mu: float
    maximizers: np.ndarray
    degenerate: bool


# ---------------------------------------------------------------------------
# closed-form kernels for the uniform ball
# ---------------------------------------------------------------------------

def _ball_J(n: int, w: np.ndarray):
    """J_n(w) = int (1-u^2)^{(n-1)/2} / (w-u) du on (-1,1), for w > 1.

    Returns (J, J', G2) with G2 = -w J' - J = int u (1-u^2)^{(n-1)/2}/(w-u)^2 du.
    The recursion J_{n+2} = (1-w^2) J_n + w B_n is stable for w near 1 but
    cancels catastrophically for large w, where the moment series in 1/w^2
    converges fast; switch at w = 2.
    """
    w = np.asarray(w, dtype=float)
    J = np.empty_like(w)
    Jp = np.empty_like(w)
    G2 = np.empty_like(w)
    near = w <= 2.0
    if near.any():
        J[near], Jp[near], G2[near] = _ball_J_recursive(n, w[near])
    far = ~near
    if far.any():
        J[far], Jp[far], G2[far] = _ball_J_series(n, w[far])
    return J, Jp, G2


def _ball_J_recursive(n, w):
    if n % 2 == 1:
        J = np.log((w + 1.0) / (w - 1.0))
        Jp = -2.0 / (w * w - 1.0)
        k = 1
    else:
        root = np.sqrt(w * w - 1.0)
        J = math.pi * (w - root)
        Jp = math.pi * (1.0 - w / root)
        k = 2
    while k < n:
        B = _slab_mass(k)
        J, Jp = (1.0 - w * w) * J + w * B, -2.0 * w * J + (1.0 - w * w) * Jp + B
        k += 2
    return J, Jp, -w * Jp - J


def _ball_J_series(n, w, tol=1e-17):
    # J_n = sum_k m_{2k} w^{-2k-1}; m_0 = B_n, m_{2k}/m_{2k-2} = (2k-1)/(2k+n)
    m = _slab_mass(n)
    iw2 = 1.0 / (w * w)
    pw = 1.0 / w
    J = np.zeros_like(w)
    Jp = np.zeros_like(w)
    G2 = np.zeros_like(w)
    for k in range(80):
        term = m * pw
        J += term
        Jp -= (2 * k + 1) * term / w
        G2 += 2 * k * term
        m *= (2 * (k + 1) - 1.0) / (2 * (k + 1) + n)
        pw *= iw2
        if m * np.max(pw) < tol * max(float(np.min(J)), tol):
            break
    return J, Jp, G2


# ---------------------------------------------------------------------------
# stable log-ratio helpers for interval / piecewise-linear kernels
# ---------------------------------------------------------------------------

def _g_log1p(x):
    """log1p(x)/x, stable as x -> 0."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-8
    xs = x[small]
    out[small] = 1.0 - xs / 2.0 + xs * xs / 3.0
    xl = x[~small]
    out[~small] = np.log1p(xl) / xl
    return out


def _g2_log1p(x):
    """(log1p(-x)^{-1}... ) helper: (l - x)/x^2 with l = -log1p(-x) = x + x^2/2 + ...
    for x in [0, 1)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 1e-6
    xs = x[small]
    out[small] = 0.5 + xs / 3.0 + xs * xs / 4.0
    xl = x[~small]
    out[~small] = (-np.log1p(-xl) - xl) / (xl * xl)
    return out


def _g3_log1p(x):
    """(x/(1-x) - l)/x^2 with l = -log1p(-x), for x in [0, 1)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x < 1e-6
    xs = x[small]
    out[small] = 0.5 + 2.0 * xs / 3.0 + 0.75 * xs * xs
    xl = x[~small]
    out[~small] = (xl / (1.0 - xl) + np.log1p(-xl)) / (xl * xl)
    return out


# ---------------------------------------------------------------------------
# per-kind vectorized resolvent reductions
# ---------------------------------------------------------------------------
# A reduction is built once per momentum batch P (shape (k, n)) and exposes
#   mu        : (k,) support values
#   F(h, rows): componentwise resolvent at trial values h, restricted to the
#               given row indices (None = all rows); h is aligned with rows
#   dF(h, rows): derivative in h (= -moment0)
#   moments(h, rows) -> (m0, m1) squared-denominator moments, m1 of shape
#               (len(rows), n)
# The implicit solver in `hamiltonian` drives these with masked Newton steps.

def _rows(rows):
    return slice(None) if rows is None else rows


class _IntervalReduction:

    def __init__(self, a, b, P):
        self.a, self.b = a, b
        self.p = np.asarray(P, dtype=float).reshape(-1)
        self.mu = np.maximum(self.a * self.p, self.b * self.p)

    def _ends(self, h, rows):
        p = self.p[_rows(rows)]
        return 1.0 + h - self.a * p, 1.0 + h - self.b * p

    def F(self, h, rows=None):
        p = self.p[_rows(rows)]
        Ab = 1.0 + h - self.b * p
        x = p * (self.b - self.a) / Ab
        return _g_log1p(x) / Ab

    def dF(self, h, rows=None):
        Aa, Ab = self._ends(h, rows)
        return -1.0 / (Aa * Ab)

    def moments(self, h, rows=None):
        Aa, Ab = self._ends(h, rows)
        m0 = 1.0 / (Aa * Ab)
        p, a, b = self.p[_rows(rows)], self.a, self.b
        h = np.asarray(h, dtype=float) * np.ones_like(p)
        t = 1.0 + h
        x = p * (b - a) / Ab
        m1 = np.empty_like(m0)
        direct = np.abs(x) >= 0.1
        if direct.any():
            pd = p[direct]
            m1[direct] = (t[direct] * (b - a) * pd / (Aa[direct] * Ab[direct])
                          - np.log1p(x[direct])) / ((b - a) * pd * pd)
        rest = ~direct
        if rest.any():
            # geometric expansion of the squared denominator; the ratio is
            # bounded by |x| < 0.1 so thirty terms are far more than enough
            tr = t[rest]
            pr = p[rest]
            acc = np.zeros_like(tr)
            ratio = pr / tr
            pw = np.ones_like(tr)
            for k in range(30):
                nu = (b ** (k + 2) - a ** (k + 2)) / ((k + 2) * (b - a))
                acc += (k + 1) * pw * nu
                pw *= ratio
            m1[rest] = acc / (tr * tr)
        return m0, m1[:, None]


class _BallReduction:

    def __init__(self, n, r, P):
        self.n, self.r = n, r
        P = np.asarray(P, dtype=float).reshape(-1, n)
        self.s = np.linalg.norm(P, axis=1)
        self.unit = np.zeros_like(P)
        pos = self.s > 0.0
        self.unit[pos] = P[pos] / self.s[pos, None]
        self.mu = self.r * self.s
        self.Bn = _slab_mass(n)

    def F(self, h, rows=None):
        s = self.s[_rows(rows)]
        h = np.asarray(h, dtype=float) * np.ones_like(s)
        out = np.empty_like(s)
        iso = s == 0.0
        out[iso] = 1.0 / (1.0 + h[iso])
        if (~iso).any():
            sa = s[~iso]
            J, _, _ = _ball_J(self.n, (1.0 + h[~iso]) / (self.r * sa))
            out[~iso] = J / (self.Bn * self.r * sa)
        return out

    def dF(self, h, rows=None):
        s = self.s[_rows(rows)]
        h = np.asarray(h, dtype=float) * np.ones_like(s)
        out = np.empty_like(s)
        iso = s == 0.0
        out[iso] = -1.0 / (1.0 + h[iso]) ** 2
        if (~iso).any():
            sa = s[~iso]
            _, Jp, _ = _ball_J(self.n, (1.0 + h[~iso]) / (self.r * sa))
            out[~iso] = Jp / (self.Bn * self.r * self.r * sa * sa)
        return out

    def moments(self, h, rows=None):
        s = self.s[_rows(rows)]
        unit = self.unit[_rows(rows)]
        h = np.asarray(h, dtype=float) * np.ones_like(s)
        m0 = np.empty_like(s)
        m1 = np.zeros((s.size, self.n))
        iso = s == 0.0
        m0[iso] = 1.0 / (1.0 + h[iso]) ** 2
        if (~iso).any():
            sa = s[~iso]
            _, Jp, G2 = _ball_J(self.n, (1.0 + h[~iso]) / (self.r * sa))
            m0[~iso] = -Jp / (self.Bn * self.r * self.r * sa * sa)
            par = G2 / (self.Bn * self.r * sa * sa)
            m1[~iso] = par[:, None] * unit[~iso]
        return m0, m1


class _AtomicReduction:

    def __init__(self, velocities, weights, P):
        P = np.asarray(P, dtype=float).reshape(-1, velocities.shape[1])
        self.V = velocities
        self.wts = weights
        self.A = P @ velocities.T          # (k, natoms) projections v.p
        self.mu = self.A.max(axis=1)

    def _D(self, h, rows):
        A = self.A[_rows(rows)]
        h = np.asarray(h, dtype=float) * np.ones(A.shape[0])
        return 1.0 + h[:, None] - A

    def F(self, h, rows=None):
        return (self.wts / self._D(h, rows)).sum(axis=1)

    def dF(self, h, rows=None):
        D = self._D(h, rows)
        return -(self.wts / (D * D)).sum(axis=1)

    def moments(self, h, rows=None):
        D = self._D(h, rows)
        q = self.wts / (D * D)
        return q.sum(axis=1), q @ self.V


class _TabulatedReduction:
    """Piecewise-linear projected kernel integrated segment-exactly.

    With K linear on [t0, t1], D(t) = A - s t and x = s (t1-t0) / D(t0):
        int K/D dt   = dt (K0 g1(x) + slope dt g2(x)) / D0
        int K/D^2 dt = dt (K0 / (D0 D1) + slope dt g3(x) / D0^2)
    where g1, g2, g3 are the stable log-ratio helpers above.  These forms are
    uniformly accurate from s = 0 up to the singular threshold, and the same
    formulas evaluate the singular integral itself (A = mu) because the last
    segment has K(R) = 0 for n >= 2.
    """

    def __init__(self, tab, P):
        self.tab = tab
        n = tab.dimension
        P = np.asarray(P, dtype=float).reshape(-1, n)
        self.s = np.linalg.norm(P, axis=1)
        self.unit = np.zeros_like(P)
        pos = self.s > 0.0
        self.unit[pos] = P[pos] / self.s[pos, None]
        self.mu = tab.radius * self.s

    def _sweep(self, h, want, rows=None):
        """Accumulate requested segment sums; want is a subset of
        {'F','m0','m1'}.  Chunked over momentum rows to bound memory."""
        tab = self.tab
        t0, K0, slope, seg = tab._kernel_segments()
        s_all = self.s[_rows(rows)]
        h = np.asarray(h, dtype=float) * np.ones_like(s_all)
        out = {k: np.empty_like(s_all) for k in want}
        for lo in range(0, s_all.size, _TAB_CHUNK):
            sl = slice(lo, lo + _TAB_CHUNK)
            s = s_all[sl][:, None]
            A = (1.0 + h[sl])[:, None]
            D0 = A - s * t0
            D1 = D0 - s * seg
            x = s * seg / D0
            Fseg = seg * (K0 * _gF1(x) + slope * seg * _g2_log1p(x)) / D0
            if "F" in want:
                out["F"][sl] = Fseg.sum(axis=1)
            if "m0" in want or "m1" in want:
                m0seg = seg * (K0 / (D0 * D1)
                               + slope * seg * _g3_log1p(x) / (D0 * D0))
                if "m0" in want:
                    out["m0"][sl] = m0seg.sum(axis=1)
                if "m1" in want:
                    # int t K/D^2 = (A int K/D^2 - int K/D)/s; switch to a
                    # direct power series when s is too small for the
                    # cancellation in that identity
                    srow = s_all[sl]
                    m1v = np.empty_like(srow)
                    tiny = srow < 1e-6 * (1.0 + h[sl])
                    big = ~tiny
                    if big.any():
                        m1v[big] = ((A[big, 0] * m0seg[big].sum(axis=1)
                                     - Fseg[big].sum(axis=1)) / srow[big])
                    if tiny.any():
                        m1v[tiny] = self._m1_series(h[sl][tiny], srow[tiny])
                    out["m1"][sl] = m1v
        return out

    def _m1_series(self, h, s):
        # int t K(t)/(A - s t)^2 dt = sum_k (k+1) s^k mom_{k+1} / A^{k+2}
        t, K = self.tab._kernel_nodes()
        A = 1.0 + h
        acc = np.zeros_like(s)
        for k in range(8):
            mom = np.trapezoid(K * t ** (k + 1), t)
            acc += (k + 1) * s ** k * mom / A ** (k + 2)
        return acc

    def F(self, h, rows=None):
        return self._sweep(h, ("F",), rows)["F"]

    def dF(self, h, rows=None):
        return -self._sweep(h, ("m0",), rows)["m0"]

    def moments(self, h, rows=None):
        got = self._sweep(h, ("m0", "m1"), rows)
        return got["m0"], got["m1"][:, None] * self.unit[_rows(rows)]


def _gF1(x):
    """ln(D0/D1)/x = -log1p(-x)/x, stable for small x, for x in [0, 1)."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-8
    xs = x[small]
    out[small] = 1.0 + xs / 2.0 + xs * xs / 3.0
    xl = x[~small]
    out[~small] = -np.log1p(-xl) / xl
    return out


# ---------------------------------------------------------------------------
# measure kinds
# ---------------------------------------------------------------------------

class VelocityMeasure:
    """Common interface of all measure kinds.  Instances are immutable."""

    kind: str
    dimension: int
    quadrature_order: int

    # -- geometry ----------------------------------------------------------

    def support_radius(self) -> float:
        raise NotImplementedError

    def support_mu(self, p) -> SupportQuery:
        raise NotImplementedError

    def mean_velocity(self) -> np.ndarray:
        raise NotImplementedError

    def hull_margin(self, v) -> float:
        """min over certificate directions u of mu(u) - v.u; negative values
        certify v outside Conv(V)."""
        v = np.asarray(v, dtype=float).reshape(self.dimension)
        dirs = _unit_directions(self.dimension)
        margins = [self.support_mu(u).mu - float(v @ u) for u in dirs]
        nv = np.linalg.norm(v)
        if nv > 0:
            u = v / nv
            margins.append(self.support_mu(u).mu - float(v @ u))
        return min(margins)

    # -- reduced integrals -------------------------------------------------

    def reduction(self, P):
        """Vectorized resolvent reduction for a batch of momenta."""
        raise NotImplementedError

    def singular_integral(self, p) -> float:
        p = self._check_p(p)
        if not np.any(p):
            raise ZeroMomentum("singular integral undefined at p = 0")
        return self._singular_integral(p)

    def resolvent_integral(self, p, h) -> float:
        p = self._check_p(p)
        red = self.reduction(p[None, :])
        self._check_denominator(float(red.mu[0]), h)
        return float(red.F(np.array([h]))[0])

    def resolvent_moment(self, p, h, order: int):
        p = self._check_p(p)
        red = self.reduction(p[None, :])
        self._check_denominator(float(red.mu[0]), h)
        m0, m1 = red.moments(np.array([h]))
        if order == 0:
            return float(m0[0])
        if order == 1:
            return m1[0].copy()
        raise ValueError("order must be 0 or 1")

    def _check_p(self, p):
        p = np.asarray(p, dtype=float).reshape(-1)
        if p.size != self.dimension:
            raise ValueError(f"momentum has size {p.size}, expected {self.dimension}")
        if not np.all(np.isfinite(p)):
            raise ValueError("momentum must be finite")
        return p

    @staticmethod
    def _check_denominator(mu, h):
        if not 1.0 + h - mu > 0.0:
            raise DenominatorNotPositive(
                f"need 1 + h > mu(p): h = {h}, mu = {mu}")

    # -- quadrature / sampling --------------------------------------------

    def projected_quadrature(self):
        """1-D probability quadrature (nodes, weights) for integrals of
        functions of the projected velocity; for 1-D measures the nodes are
        the velocities themselves."""
        raise NotImplementedError

    def sample_velocities(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    # -- config ------------------------------------------------------------

    def to_config(self) -> dict:
        raise NotImplementedError

    def fingerprint(self) -> str:
        blob = json.dumps(self.to_config(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def _check_interior(self, required: bool = True):
        dirs = _unit_directions(self.dimension)
        worst = min(self.support_mu(u).mu for u in dirs)
        self.origin_interior = bool(worst > 1e-12 * max(1.0, self.support_radius()))
        if required and not self.origin_interior:
            raise ValueError("the origin must lie strictly inside the convex "
                             "hull of the velocity support (pass "
                             "require_interior=False for simulation-only use)")


class UniformInterval(VelocityMeasure):
    """Uniform density on (a, b) with a < 0 < b.  One-dimensional."""

    kind = "uniform_interval"

    def __init__(self, a: float, b: float,
                 quadrature_order: int = DEFAULT_QUADRATURE_ORDER,
                 require_interior: bool = True):
        if not a < b:
            raise ValueError("need a < b")
        self.a = float(a)
        self.b = float(b)
        self.dimension = 1
        if quadrature_order < 1:
            raise ValueError("quadrature_order must be positive")
        self.quadrature_order = int(quadrature_order)
        self._check_interior(require_interior)

    def support_radius(self):
        return max(abs(self.a), abs(self.b))

    def support_mu(self, p):
        p = self._check_p(p)
        x = float(p[0])
        if x == 0.0:
            return SupportQuery(p, 0.0, np.array([[self.a], [self.b]]), True)
        v = self.b if x > 0 else self.a
        return SupportQuery(p, v * x, np.array([[v]]), False)

    def mean_velocity(self):
        return np.array([0.5 * (self.a + self.b)])

    def reduction(self, P):
        return _IntervalReduction(self.a, self.b, P)

    def _singular_integral(self, p):
        # endpoint density does not vanish: logarithmic divergence
        return math.inf

    def projected_quadrature(self):
        x, w = np.polynomial.legendre.leggauss(self.quadrature_order)
        nodes = 0.5 * (self.a + self.b) + 0.5 * (self.b - self.a) * x
        return nodes, w / 2.0

    def sample_velocities(self, rng, size):
        return rng.uniform(self.a, self.b, size=(size, 1))

    def to_config(self):
        cfg = {"kind": self.kind, "dimension": 1,
               "endpoints": [self.a, self.b],
               "quadrature_order": self.quadrature_order}
        if not self.origin_interior:
            cfg["require_interior"] = False
        return cfg


class UniformBall(VelocityMeasure):
    """Uniform density on the closed ball of given radius in R^n."""

    kind = "uniform_ball"

    def __init__(self, dimension: int, radius: float = 1.0,
                 quadrature_order: int = DEFAULT_QUADRATURE_ORDER):
        if dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.dimension = int(dimension)
        self.radius = float(radius)
        self.quadrature_order = int(quadrature_order)
        self.origin_interior = True

    def support_radius(self):
        return self.radius

    def support_mu(self, p):
        p = self._check_p(p)
        s = float(np.linalg.norm(p))
        if s == 0.0:
            return SupportQuery(p, 0.0, np.empty((0, self.dimension)), True)
        return SupportQuery(p, self.radius * s,
                            (self.radius / s) * p[None, :], False)

    def mean_velocity(self):
        return np.zeros(self.dimension)

    def reduction(self, P):
        return _BallReduction(self.dimension, self.radius, P)

    def _singular_integral(self, p):
        n = self.dimension
        if n == 1:
            return math.inf
        s = float(np.linalg.norm(p))
        return n / ((n - 1.0) * self.radius * s)

    def projected_quadrature(self):
        n = self.dimension
        if n == 1:
            x, w = np.polynomial.legendre.leggauss(self.quadrature_order)
            return self.radius * x, w / 2.0
        # Jacobi weight (1-u^2)^{(n-1)/2} is exactly the projected density
        x, w = roots_jacobi(self.quadrature_order, (n - 1) / 2.0, (n - 1) / 2.0)
        return self.radius * x, w / _slab_mass(n)

    def sample_velocities(self, rng, size):
        n, r = self.dimension, self.radius
        out = np.empty((size, n))
        filled = 0
        while filled < size:
            block = rng.uniform(-r, r, size=(2 * (size - filled) + 16, n))
            keep = block[(block * block).sum(axis=1) <= r * r]
            take = min(keep.shape[0], size - filled)
            out[filled:filled + take] = keep[:take]
            filled += take
        return out

    def to_config(self):
        return {"kind": self.kind, "dimension": self.dimension,
                "radius": self.radius,
                "quadrature_order": self.quadrature_order}


class Atomic(VelocityMeasure):
    """Finitely many velocity atoms with positive weights summing to one."""

    kind = "atomic"

    def __init__(self, velocities, weights,
                 quadrature_order: int = DEFAULT_QUADRATURE_ORDER,
                 require_interior: bool = True):
        V = np.asarray(velocities, dtype=float)
        if V.ndim == 1:
            V = V[:, None]
        w = np.asarray(weights, dtype=float)
        if V.shape[0] != w.size:
            raise ValueError("one weight per atom required")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1 within 1e-12")
        # lexicographic atom order fixes every later tie-break
        order = np.lexsort(V.T[::-1])
        self.velocities = V[order].copy()
        self.weights = w[order].copy()
        self.dimension = V.shape[1]
        self.quadrature_order = int(quadrature_order)
        self._alias = None
        self._check_interior(require_interior)

    def support_radius(self):
        return float(np.linalg.norm(self.velocities, axis=1).max())

    def support_mu(self, p):
        p = self._check_p(p)
        dots = self.velocities @ p
        mu = float(dots.max())
        scale = max(1.0, abs(mu))
        tied = self.velocities[dots >= mu - 1e-12 * scale]
        return SupportQuery(p, mu, tied, tied.shape[0] > 1)

    def mean_velocity(self):
        return self.weights @ self.velocities

    def reduction(self, P):
        return _AtomicReduction(self.velocities, self.weights, P)

    def _singular_integral(self, p):
        dots = self.velocities @ p
        mu = dots.max()
        gaps = mu - dots
        scale = max(1.0, abs(float(mu)))
        if np.any(gaps <= 1e-12 * scale):
            # an atom always attains the maximum, so this branch always fires;
            # the finite sum below is kept for completeness
            return math.inf
        return float((self.weights / gaps).sum())

    def projected_quadrature(self):
        if self.dimension != 1:
            raise ValueError("projected quadrature of an atomic measure is "
                             "only defined in one dimension")
        return self.velocities[:, 0].copy(), self.weights.copy()

    def sample_velocities(self, rng, size):
        idx = self._alias_sample(rng, size)
        return self.velocities[idx]

    def _alias_sample(self, rng, size):
        if self._alias is None:
            self._alias = _build_alias(self.weights)
        prob, alias = self._alias
        k = self.weights.size
        slots = rng.integers(0, k, size=size)
        flips = rng.random(size)
        return np.where(flips < prob[slots], slots, alias[slots])

    def to_config(self):
        cfg = {"kind": self.kind, "dimension": self.dimension,
               "atoms": [{"velocity": list(map(float, v)), "weight": float(w)}
                         for v, w in zip(self.velocities, self.weights)],
                "quadrature_order": self.quadrature_order}
        if not self.origin_interior:
            cfg["require_interior"] = False
        return cfg


def _build_alias(weights):
    """Vose alias table for O(1) discrete sampling."""
    k = weights.size
    prob = np.empty(k)
    alias = np.zeros(k, dtype=np.int64)
    scaled = weights * k
    small = [i for i in range(k) if scaled[i] < 1.0]
    large = [i for i in range(k) if scaled[i] >= 1.0]
    scaled = scaled.copy()
    while small and large:
        s, l = small.pop(), large.pop()
        prob[s] = scaled[s]
        alias[s] = l
        scaled[l] = scaled[l] - (1.0 - scaled[s])
        (small if scaled[l] < 1.0 else large).append(l)
    for i in large + small:
        prob[i] = 1.0
    return prob, alias


class TabulatedRadial(VelocityMeasure):
    """Rotationally invariant density given by radial samples on [0, R].

    The samples are interpreted as a piecewise-linear radial profile and
    normalized to unit mass at construction.  All reduced integrals go
    through the projected kernel K(t) = int_{v.e = t} M(v), itself tabulated
    on a fine grid and integrated segment-exactly.
    """

    kind = "tabulated_radial"

    def __init__(self, dimension: int, radius: float, samples,
                 quadrature_order: int = DEFAULT_QUADRATURE_ORDER):
        if dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if radius <= 0:
            raise ValueError("radius must be positive")
        g = np.asarray(samples, dtype=float)
        if g.ndim != 1 or g.size < 2:
            raise ValueError("need at least two radial samples")
        if np.any(g < 0) or not np.all(np.isfinite(g)):
            raise ValueError("radial samples must be finite and nonnegative")
        if g.max() <= 0:
            raise ValueError("radial density vanishes identically")
        self.dimension = int(dimension)
        self.radius = float(radius)
        self.quadrature_order = int(quadrature_order)
        self._rho = np.linspace(0.0, self.radius, g.size)
        n = self.dimension
        if n == 1:
            mass = 2.0 * np.trapezoid(g, self._rho)
        else:
            # exact mass of the piecewise-linear profile under the rho^(n-1)
            # weight; plain trapezoid is not exact here and the mismatch
            # would leak into every projected integral
            r0, r1 = self._rho[:-1], self._rho[1:]
            g0, g1 = g[:-1], g[1:]
            slope = (g1 - g0) / (r1 - r0)
            const = g0 - slope * r0
            shell = (const * (r1 ** n - r0 ** n) / n
                     + slope * (r1 ** (n + 1) - r0 ** (n + 1)) / (n + 1))
            mass = _sphere_area(n) * shell.sum()
        self.samples = g / mass
        # the declared (unnormalized) profile is what config round-trips;
        # re-normalizing normalized samples would drift by an ulp
        self._declared = g.copy()
        self._kernel = None
        self.origin_interior = True

    def support_radius(self):
        return self.radius

    def support_mu(self, p):
        p = self._check_p(p)
        s = float(np.linalg.norm(p))
        if s == 0.0:
            return SupportQuery(p, 0.0, np.empty((0, self.dimension)), True)
        return SupportQuery(p, self.radius * s, (self.radius / s) * p[None, :],
                            False)

    def mean_velocity(self):
        return np.zeros(self.dimension)

    def _radial_density(self, rho):
        return np.interp(np.abs(rho), self._rho, self.samples)

    def _kernel_nodes(self):
        """Projected kernel K(t) sampled on a cosine-spaced grid of [-R, R].

        Cosine spacing clusters nodes at the edges, where even-dimensional
        kernels have square-root behaviour that a uniform grid would resolve
        poorly.  The tabulated kernel is renormalized to unit mass so every
        downstream integral sees exactly the same probability measure."""
        if self._kernel is None:
            R, n = self.radius, self.dimension
            j = np.arange(_TAB_KERNEL_NODES)
            t = -R * np.cos(np.pi * j / (_TAB_KERNEL_NODES - 1))
            t[0], t[-1] = -R, R
            if n == 1:
                K = self._radial_density(t)
            else:
                # K(t) = sigma_{n-2} int_0^{sqrt(R^2-t^2)} g(sqrt(t^2+y^2))
                #        y^{n-2} dy  (sigma_0 = 2 for n = 2)
                x, w = np.polynomial.legendre.leggauss(
                    max(_TAB_INNER_ORDER, self.quadrature_order // 2))
                ymax = np.sqrt(np.maximum(R * R - t * t, 0.0))
                y = 0.5 * ymax[:, None] * (x[None, :] + 1.0)
                wy = 0.5 * ymax[:, None] * w[None, :]
                rho = np.sqrt(t[:, None] ** 2 + y * y)
                integ = self._radial_density(rho) * y ** (n - 2)
                K = _sphere_area(n - 1) * (integ * wy).sum(axis=1)
                K[[0, -1]] = 0.0
            K = K / np.trapezoid(K, t)
            self._kernel = (t, K)
        return self._kernel

    def _kernel_segments(self):
        t, K = self._kernel_nodes()
        seg = np.diff(t)
        return t[:-1], K[:-1], (K[1:] - K[:-1]) / seg, seg

    def reduction(self, P):
        return _TabulatedReduction(self, P)

    def _singular_integral(self, p):
        s = float(np.linalg.norm(p))
        t0, K0, slope, seg = self._kernel_segments()
        t, K = self._kernel_nodes()
        if K[-1] > 1e-12 * K.max():
            return math.inf
        mu = self.radius * s
        D0 = mu - s * t0[:-1]
        sb = seg[:-1]
        x = s * sb / D0
        body = (sb * (K0[:-1] * _gF1(x) + slope[:-1] * sb * _g2_log1p(x))
                / D0).sum()
        # last segment: K vanishes linearly at R, the pole cancels exactly
        last = K0[-1] / s
        val = float(body + last)
        return math.inf if val > SINGULAR_INTEGRAL_CAP else val

    def projected_quadrature(self):
        t, K = self._kernel_nodes()
        x, w = np.polynomial.legendre.leggauss(self.quadrature_order)
        nodes = self.radius * x
        wts = w * self.radius * np.interp(nodes, t, K)
        return nodes, wts / wts.sum()

    def sample_velocities(self, rng, size):
        n = self.dimension
        # inverse CDF on the radius, uniform direction
        rho = self._rho
        pdf = self.samples * rho ** (n - 1) if n > 1 else self.samples
        cdf = np.concatenate([[0.0], np.cumsum(
            0.5 * (pdf[1:] + pdf[:-1]) * np.diff(rho))])
        cdf /= cdf[-1]
        u = rng.random(size)
        r = np.interp(u, cdf, rho)
        if n == 1:
            sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
            return (sign * r)[:, None]
        g = rng.standard_normal((size, n))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        return r[:, None] * g

    def to_config(self):
        return {"kind": self.kind, "dimension": self.dimension,
                "radius": self.radius,
                "radial_samples": [float(v) for v in self._declared],
                "quadrature_order": self.quadrature_order}


# ---------------------------------------------------------------------------
# free-function API and config parsing
# ---------------------------------------------------------------------------

def support_mu(m: VelocityMeasure, p) -> SupportQuery:
    return m.support_mu(p)


def singular_integral(m: VelocityMeasure, p) -> float:
    return m.singular_integral(p)


def resolvent_integral(m: VelocityMeasure, p, h) -> float:
    return m.resolvent_integral(p, h)


def resolvent_moment(m: VelocityMeasure, p, h, order: int):
    return m.resolvent_moment(p, h, order)


_MEASURE_FIELDS = {
    "uniform_interval": {"kind", "dimension", "endpoints", "quadrature_order",
                         "require_interior"},
    "uniform_ball": {"kind", "dimension", "radius", "quadrature_order"},
    "atomic": {"kind", "dimension", "atoms", "quadrature_order",
               "require_interior"},
    "tabulated_radial": {"kind", "dimension", "radius", "radial_samples",
                         "quadrature_order"},
}


def measure_from_config(cfg: dict, path: str = "measure") -> VelocityMeasure:
    """Build a measure from its declarative description; unknown fields and
    out-of-range values are rejected with the offending field path."""
    if not isinstance(cfg, dict):
        raise ConfigError("measure description must be an object", path)
    kind = cfg.get("kind")
    if kind not in _MEASURE_FIELDS:
        raise ConfigError(f"unknown kind {kind!r}; expected one of "
                          f"{sorted(_MEASURE_FIELDS)}", f"{path}.kind")
    allowed = _MEASURE_FIELDS[kind]
    for key in cfg:
        if key not in allowed:
            raise ConfigError(f"unknown field {key!r} for kind {kind!r}",
                              f"{path}.{key}")
    order = cfg.get("quadrature_order", DEFAULT_QUADRATURE_ORDER)
    if not isinstance(order, int) or order < 1:
        raise ConfigError("quadrature_order must be a positive integer",
                          f"{path}.quadrature_order")
    interior = cfg.get("require_interior", True)
    if not isinstance(interior, bool):
        raise ConfigError("require_interior must be a boolean",
                          f"{path}.require_interior")
    try:
        if kind == "uniform_interval":
            a, b = cfg["endpoints"]
            m = UniformInterval(a, b, order, require_interior=interior)
        elif kind == "uniform_ball":
            m = UniformBall(cfg.get("dimension", 1), cfg.get("radius", 1.0),
                            order)
        elif kind == "atomic":
            atoms = cfg["atoms"]
            m = Atomic([a["velocity"] for a in atoms],
                       [a["weight"] for a in atoms], order,
                       require_interior=interior)
        else:
            m = TabulatedRadial(cfg.get("dimension", 1), cfg["radius"],
                                cfg["radial_samples"], order)
    except KeyError as exc:
        raise ConfigError(f"missing field {exc.args[0]!r}", path) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), path) from None
    declared = cfg.get("dimension")
    if declared is not None and declared != m.dimension:
        raise ConfigError(f"declared dimension {declared} does not match "
                          f"the measure ({m.dimension})", f"{path}.dimension")
    return m
