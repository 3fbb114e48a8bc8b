"""Effective Hamiltonian of the velocity jump process and its Legendre dual.

For momentum p the Hamiltonian H(p) is determined by the resolvent equation
F(H) = 1 with F(h) = int M(v) / (1 + h - v.p) dv, except inside the singular
set where the equation has no root and H(p) = mu(p) - 1 with mu the support
function of the velocity hull.  The two regimes meet continuously; the
classification is read off the singular integral int M / (mu - v.p) <= 1.

Everything here drives the per-measure reductions from `measure`, which
evaluate F, dF and the squared-denominator moments for whole batches of
momenta at once.  The root solve is a bracketed Newton iteration performed
simultaneously on all rows, with rows dropping out as they converge.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DegenerateMaximizer, NoBracket, OutsideHull, ZeroMomentum
from .measure import TabulatedRadial, UniformBall, VelocityMeasure

RESIDUAL_TOL = 1e-12
PROBE_FLOOR = 1e-14
MOMENTUM_CAP = 1e4
BOUNDARY_RADIUS_CAP = 1e6

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class Regime(enum.Enum):
    REGULAR = "regular"
    SINGULAR = "singular"


@dataclass(frozen=True)
class HamiltonianEval:
    """One solved momentum: value, regime, gradient and the residual of the
    resolvent equation (zero by convention in the singular regime)."""
    p: np.ndarray
    H: float
    regime: Regime
    grad: np.ndarray
    residual: float


@dataclass(frozen=True)
class EigenPair:
    """Principal eigenvalue H(p) together with the stationary velocity
    profile.  The continuum part of the profile is

        Q(v) = density_scale / (1 + H - v.p)

    against M(v) dv; in the singular regime an extra point mass of weight
    atom_weight sits at atom_location (the maximizing velocity)."""
    p: np.ndarray
    H: float
    regime: Regime
    density_scale: float
    atom_weight: float
    atom_location: Optional[np.ndarray]

    def density(self, v) -> np.ndarray:
        """Continuum density at velocities v, one row per sample; the atom,
        when present, is reported separately via atom_weight."""
        v = np.atleast_2d(np.asarray(v, dtype=float))
        denom = 1.0 + self.H - v @ self.p
        return self.density_scale / denom


@dataclass(frozen=True)
class LegendreEval:
    v: np.ndarray
    L: float
    argmax_p: np.ndarray
    boundary: bool


# ---------------------------------------------------------------------------
# batch root solve
# ---------------------------------------------------------------------------

def _implicit_solve(red, ftol: float = RESIDUAL_TOL, max_iter: int = 200):
    """Solve F(H) = 1 rowwise on a reduction; returns (H, singular, residual).

    Rows where F stays below 1 all the way down the probe ladder
    mu - 1 + delta, delta -> 1e-14, are singular and get H = mu - 1.
    """
    mu = red.mu
    k = mu.size
    H = np.empty(k)
    singular = np.zeros(k, dtype=bool)
    residual = np.zeros(k)

    scale = 1.0 + np.abs(mu)
    delta = 1e-2 * scale
    lo_off = np.full(k, np.nan)
    probing = np.ones(k, dtype=bool)
    while probing.any():
        idx = np.flatnonzero(probing)
        # at large |p| the offset can underflow against mu - 1, making a
        # denominator exactly zero; a non-finite value means the root sits
        # below floating resolution, so mu - 1 is the answer to within an ulp
        with np.errstate(divide="ignore", invalid="ignore"):
            f = red.F(mu[idx] - 1.0 + delta[idx], idx)
        edge = ~np.isfinite(f)
        singular[idx[edge]] = True
        probing[idx[edge]] = False
        found = (f >= 1.0) & ~edge
        lo_off[idx[found]] = delta[idx[found]]
        probing[idx[found]] = False
        shrink = idx[~found & ~edge]
        delta[shrink] /= 10.0
        exhausted = shrink[delta[shrink] < PROBE_FLOOR]
        singular[exhausted] = True
        probing[exhausted] = False

    H[singular] = mu[singular] - 1.0
    reg = np.flatnonzero(~singular)
    if reg.size == 0:
        return H, singular, residual

    lo = mu[reg] - 1.0 + lo_off[reg]
    width = scale[reg].copy()
    hi = lo + width
    need = np.ones(reg.size, dtype=bool)
    for _ in range(60):
        idx = np.flatnonzero(need)
        if idx.size == 0:
            break
        f = red.F(hi[idx], reg[idx])
        below = f < 1.0
        need[idx[below]] = False
        grow = idx[~below]
        lo[grow] = hi[grow]       # F >= 1 there, still a valid lower end
        width[grow] *= 2.0
        hi[grow] += width[grow]
    if need.any():
        bad = int(np.flatnonzero(need)[0])
        raise NoBracket(f"could not bracket the resolvent root for momentum "
                        f"row {int(reg[bad])}")

    x = 0.5 * (lo + hi)
    fcur = np.zeros(reg.size)
    active = np.ones(reg.size, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        f = red.F(x[idx], reg[idx]) - 1.0
        fcur[idx] = f
        done = np.abs(f) <= ftol
        active[idx[done]] = False
        keep = idx[~done]
        if keep.size == 0:
            break
        fk = f[~done]
        df = red.dF(x[keep], reg[keep])
        above = fk > 0.0          # F decreasing: root is to the right
        lo[keep[above]] = x[keep[above]]
        hi[keep[~above]] = x[keep[~above]]
        with np.errstate(divide="ignore", invalid="ignore"):
            cand = x[keep] - fk / df
        inside = (cand > lo[keep]) & (cand < hi[keep]) & (df != 0.0)
        cand = np.where(inside, cand, 0.5 * (lo[keep] + hi[keep]))
        x[keep] = cand

    H[reg] = x
    residual[reg] = np.abs(fcur)
    return H, singular, residual


def _rotational(m: VelocityMeasure) -> bool:
    return isinstance(m, (UniformBall, TabulatedRadial))


def _singular_gradients(m: VelocityMeasure, P: np.ndarray) -> np.ndarray:
    """Gradient rows in the singular regime: the maximizing velocity."""
    if _rotational(m):
        s = np.linalg.norm(P, axis=1, keepdims=True)
        return m.support_radius() * P / s
    out = np.empty_like(P, dtype=float)
    for i, row in enumerate(P):
        sq = m.support_mu(row)
        if sq.degenerate or sq.maximizers.shape[0] != 1:
            raise DegenerateMaximizer(
                "the maximizing velocity is not unique at momentum "
                f"{np.asarray(row).tolist()}")
        out[i] = sq.maximizers[0]
    return out


def solve_H_many(m: VelocityMeasure, P, with_grad: bool = True):
    """Vectorized Hamiltonian over momentum rows P of shape (k, d).

    Returns (H, singular, grad, residual); grad is None when with_grad is
    False.  Gradients use the moment ratio in the regular regime and the
    maximizing velocity in the singular one.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    if P.shape[1] != m.dimension:
        raise ValueError(f"momentum rows must have dimension {m.dimension}")
    red = m.reduction(P)
    H, singular, residual = _implicit_solve(red)
    grad = None
    if with_grad:
        grad = np.empty_like(P, dtype=float)
        reg = np.flatnonzero(~singular)
        if reg.size:
            m0, m1 = red.moments(H[reg], reg)
            grad[reg] = m1 / m0[:, None]
        sng = np.flatnonzero(singular)
        if sng.size:
            grad[sng] = _singular_gradients(m, P[sng])
    return H, singular, grad, residual


def solve_H(m: VelocityMeasure, p) -> HamiltonianEval:
    """Hamiltonian at a single momentum with regime, gradient and residual."""
    p = np.asarray(p, dtype=float).reshape(-1)
    H, singular, grad, residual = solve_H_many(m, p[None, :], with_grad=False)
    regime = Regime.SINGULAR if singular[0] else Regime.REGULAR
    if regime is Regime.SINGULAR:
        g = _singular_gradients(m, p[None, :])[0]
    else:
        red = m.reduction(p[None, :])
        m0, m1 = red.moments(H[:1])
        g = m1[0] / m0[0]
    return HamiltonianEval(p=p, H=float(H[0]), regime=regime,
                           grad=g, residual=float(residual[0]))


def classify(m: VelocityMeasure, p) -> Regime:
    """Regular/singular dichotomy via the singular integral; the origin is
    regular by convention."""
    p = np.asarray(p, dtype=float).reshape(-1)
    if np.all(p == 0.0):
        return Regime.REGULAR
    I = m.singular_integral(p)
    return Regime.SINGULAR if I <= 1.0 else Regime.REGULAR


def grad_H(m: VelocityMeasure, p) -> np.ndarray:
    return solve_H(m, p).grad


def eigenpair(m: VelocityMeasure, p) -> EigenPair:
    """Principal eigenvalue and stationary velocity profile at momentum p.

    Regular regime: Q = c M / (1 + H - v.p) with c making Q a probability
    measure.  Singular regime: the same continuum shape with c = 1 (then
    1 + H = mu) plus an atom of weight 1 - int M/(mu - v.p) >= 0 at the
    maximizing velocity.
    """
    p = np.asarray(p, dtype=float).reshape(-1)
    if np.all(p == 0.0):
        raise ZeroMomentum("eigenpair requires a nonzero momentum")
    ev = solve_H(m, p)
    if ev.regime is Regime.REGULAR:
        c = 1.0 / m.resolvent_integral(p, ev.H)
        return EigenPair(p=p, H=ev.H, regime=ev.regime, density_scale=c,
                         atom_weight=0.0, atom_location=None)
    I = m.singular_integral(p)
    alpha = max(0.0, 1.0 - I)
    sq = m.support_mu(p)
    if sq.maximizers.shape[0] == 0:
        raise DegenerateMaximizer("no maximizing velocity available at "
                                  f"momentum {p.tolist()}")
    # ties resolved lexicographically; atom rows are already sorted
    loc = sq.maximizers[0] if alpha > 0.0 else None
    return EigenPair(p=p, H=ev.H, regime=ev.regime, density_scale=1.0,
                     atom_weight=alpha, atom_location=loc)


def sing_boundary_radius(m: VelocityMeasure, direction) -> float:
    """Radius where the ray rho * u crosses into the singular set.

    Doubles an upper bound until the classification flips, then bisects to
    1e-9; rays that stay regular past 1e6 report +inf.  The singular
    integral is homogeneous of degree -1 along rays, so the bisection
    converges onto I(u) exactly.
    """
    u = np.asarray(direction, dtype=float).reshape(-1)
    norm = np.linalg.norm(u)
    if norm == 0.0:
        raise ZeroMomentum("direction must be nonzero")
    u = u / norm

    def is_singular(rho: float) -> bool:
        return m.singular_integral(rho * u) <= 1.0

    hi = 1.0
    while not is_singular(hi):
        hi *= 2.0
        if hi > BOUNDARY_RADIUS_CAP:
            return math.inf
    lo = 0.0
    while hi - lo > 1e-9:
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if is_singular(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# Legendre transform
# ---------------------------------------------------------------------------

def _golden_max_batch(g, lo, hi, iters: int = 70):
    """Vectorized golden-section maximization of a rowwise-concave g."""
    lo = np.asarray(lo, dtype=float).copy()
    hi = np.asarray(hi, dtype=float).copy()
    w = hi - lo
    x1 = hi - _INVPHI * w
    x2 = lo + _INVPHI * w
    f1 = g(x1)
    f2 = g(x2)
    for _ in range(iters):
        left = f1 >= f2
        hi = np.where(left, x2, hi)
        lo = np.where(left, lo, x1)
        w = hi - lo
        x1n = hi - _INVPHI * w
        x2n = lo + _INVPHI * w
        xeval = np.where(left, x1n, x2n)
        feval = g(xeval)
        f1o = f1
        f1 = np.where(left, feval, f2)
        f2 = np.where(left, f1o, feval)
        x1, x2 = x1n, x2n
    xm = np.where(f1 >= f2, x1, x2)
    fm = np.maximum(f1, f2)
    return xm, fm


def _expand_bracket(g, k: int, two_sided: bool, cap: float = MOMENTUM_CAP):
    """Per-row symmetric (or one-sided) bracket growth until the objective
    decays at the ends; concavity makes the test g(S) < g(S/2) sufficient."""
    S = np.ones(k)
    for _ in range(int(math.log2(cap)) + 2):
        grow = g(S) >= g(0.5 * S)
        if two_sided:
            grow = grow | (g(-S) >= g(-0.5 * S))
        grow &= S < cap
        if not grow.any():
            break
        S[grow] = np.minimum(2.0 * S[grow], cap)
    return S


def _hull_margin(m: VelocityMeasure, v: np.ndarray) -> float:
    """Distance-like certificate of v against the velocity hull; exact for
    the rotation-invariant kinds, direction-sampled otherwise."""
    if _rotational(m):
        return m.support_radius() - float(np.linalg.norm(v))
    if m.dimension == 1:
        vlo, vhi = _hull_interval(m)
        return float(min(v[0] - vlo, vhi - v[0]))
    return m.hull_margin(v)


def _hull_interval(m: VelocityMeasure):
    sq_lo = m.support_mu(np.array([-1.0]))
    sq_hi = m.support_mu(np.array([1.0]))
    return -sq_lo.mu, sq_hi.mu


def legendre(m: VelocityMeasure, v) -> LegendreEval:
    """Legendre transform L(v) = sup_p (v.p - H(p)) with its maximizer.

    Velocities outside the hull (certified at tolerance 1e-9 relative to the
    support radius) raise OutsideHull; hull-boundary points are evaluated
    with the momentum search capped at |p| = 1e4 and flagged.
    """
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size != m.dimension:
        raise ValueError(f"velocity must have dimension {m.dimension}")
    scale = max(1.0, m.support_radius())
    margin = _hull_margin(m, v)
    if margin < -1e-9 * scale:
        raise OutsideHull(f"velocity {v.tolist()} lies outside the support "
                          "hull")
    boundary = margin <= 1e-9 * scale

    if m.dimension == 1:
        def g(parr):
            H, _, _, _ = solve_H_many(m, np.asarray(parr, dtype=float)
                                      .reshape(-1, 1), with_grad=False)
            return np.asarray(parr) * v[0] - H

        S = _expand_bracket(g, 1, two_sided=True)
        x, f = _golden_max_batch(g, -S, S, iters=90)
        pstar = np.array([float(x[0])])
        L = float(f[0])
    elif _rotational(m):
        speed = float(np.linalg.norm(v))
        unit = v / speed if speed > 0.0 else np.zeros_like(v)

        def g(sarr):
            sarr = np.asarray(sarr, dtype=float)
            P = np.abs(sarr)[:, None] * (unit[None, :] if speed > 0.0
                                         else _first_axis(m.dimension))
            H, _, _, _ = solve_H_many(m, P, with_grad=False)
            return sarr * speed - H

        S = _expand_bracket(g, 1, two_sided=False)
        x, f = _golden_max_batch(g, np.zeros(1), S, iters=90)
        pstar = float(x[0]) * unit
        L = float(f[0])
    else:
        from scipy.optimize import minimize

        def neg(p):
            return -(float(p @ v) - solve_H(m, p).H)

        best = None
        for start in (np.zeros(m.dimension), v.copy()):
            res = minimize(neg, start, method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-12,
                                    "maxiter": 2000})
            if best is None or res.fun < best.fun:
                best = res
        pstar = np.asarray(best.x, dtype=float)
        L = -float(best.fun)

    if L < 0.0:
        # sup over p includes p = 0, so L >= 0; clip solver noise
        L, pstar = 0.0, np.zeros_like(pstar)
    return LegendreEval(v=v, L=L, argmax_p=pstar, boundary=boundary)


def _first_axis(d: int) -> np.ndarray:
    e = np.zeros((1, d))
    e[0, 0] = 1.0
    return e


# ---------------------------------------------------------------------------
# tabulated rate function for the variational solver
# ---------------------------------------------------------------------------

class RateFunction:
    """L sampled on a velocity lattice spanning the support hull, with
    piecewise-linear evaluation for field sweeps and a polished direct
    evaluation for single points.  +inf outside the hull."""

    def __init__(self, m: VelocityMeasure, step: Optional[float] = None):
        self.m = m
        self.dimension = m.dimension
        R = m.support_radius()
        self.step = 1e-3 * R if step is None else float(step)
        if m.dimension == 1:
            vlo, vhi = _hull_interval(m)
            npts = max(2, int(round((vhi - vlo) / self.step)) + 1)
            self.vgrid = np.linspace(vlo, vhi, npts)
            proj = self.vgrid
        elif _rotational(m):
            npts = max(2, int(round(R / self.step)) + 1)
            self.vgrid = np.linspace(0.0, R, npts)
            proj = self.vgrid
        else:
            raise NotImplementedError(
                "lattice rate functions cover 1-D and rotation-invariant "
                "measures; evaluate legendre() pointwise for other kinds")

        def g(parr):
            H, _, _, _ = solve_H_many(m, np.asarray(parr, dtype=float)
                                      .reshape(-1, 1) if m.dimension == 1
                                      else np.abs(parr)[:, None]
                                      * _first_axis(m.dimension),
                                      with_grad=False)
            return parr * proj - H

        two_sided = m.dimension == 1
        S = _expand_bracket(g, proj.size, two_sided=two_sided)
        lo = -S if two_sided else np.zeros_like(S)
        x, f = _golden_max_batch(g, lo, S, iters=70)
        self.pgrid = x
        self.Lgrid = np.maximum(f, 0.0)

    def __call__(self, v):
        """Piecewise-linear L at projected speeds (1-D: signed velocity,
        rotational: |v|); +inf outside the lattice range."""
        v = np.asarray(v, dtype=float)
        out = np.interp(v, self.vgrid, self.Lgrid)
        lo, hi = self.vgrid[0], self.vgrid[-1]
        return np.where((v < lo) | (v > hi), np.inf, out)

    def value(self, v) -> float:
        """Direct polished evaluation at one velocity vector."""
        return legendre(self.m, v).L


_RATE_CACHE: dict = {}


def rate_function(m: VelocityMeasure, step: Optional[float] = None) -> RateFunction:
    key = (m.fingerprint(), step)
    got = _RATE_CACHE.get(key)
    if got is None:
        got = RateFunction(m, step)
        _RATE_CACHE[key] = got
    return got
