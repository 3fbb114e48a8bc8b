"""Finite-scale solver for the exponentially rescaled kinetic equation.

The unknown is the phase potential phi_eps(t, x, v) solving

    d_t phi + v . d_x phi = 1 - int M(v') exp((phi(v) - phi(v')) / eps) dv'

discretized with upwind transport in x and a pointwise-implicit exchange
step.  The implicit exchange is unconditionally monotone: writing the
update as y = a + dt (1 - exp((y - m)/eps) S) with m the velocity minimum
and S <= 1 a weighted sum of non-positive exponentials, the root always
stays inside [min a, max a], so the scheme obeys the comparison principle
exactly, up to the Newton tolerance.

`linear_f_solve` integrates the same dynamics in the unscaled variable
f = exp(-phi/eps), where the exchange is linear and mass is conserved to
rounding; it is the cross-check for moderate eps, before underflow bites.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BoundViolation, CflViolation, UnderflowRisk
from .hj import GridField, GridSpec, hopf_lax_field
from .measure import VelocityMeasure

_EXP_CLIP = 700.0


@dataclass
class KineticField:
    """Phase potential on (time, velocity node, space node)."""
    eps: float
    times: np.ndarray
    x: np.ndarray
    vnodes: np.ndarray
    vweights: np.ndarray
    values: np.ndarray             # (nt, nv, nx)
    lip0: float
    sup0: float
    bound_report: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def velocity_spread(self, k: Optional[int] = None) -> float:
        """Largest max-min gap over velocities, per space cell."""
        vals = self.values if k is None else self.values[k][None]
        return float((vals.max(axis=1) - vals.min(axis=1)).max())

    def mean_potential(self, k: int) -> np.ndarray:
        return self.vweights @ self.values[k]


def _velocity_nodes(m: VelocityMeasure):
    nodes, weights = m.projected_quadrature()
    order = np.argsort(nodes)
    return np.asarray(nodes, dtype=float)[order], \
        np.asarray(weights, dtype=float)[order]


def _transport(phi: np.ndarray, v: np.ndarray, dt: float, dx: float):
    """One upwind advection step per velocity node, periodic in x."""
    back = (phi - np.roll(phi, 1, axis=1)) / dx
    fwd = (np.roll(phi, -1, axis=1) - phi) / dx
    deriv = np.where(v[:, None] > 0.0, back, fwd)
    return phi - dt * v[:, None] * deriv


def _exchange_implicit(phi_star: np.ndarray, w: np.ndarray, eps: float,
                       dt: float, tol: float):
    """Solve the pointwise-implicit exchange update by guarded Newton."""
    mstar = phi_star.min(axis=0)
    shifted = np.exp(np.clip((mstar[None, :] - phi_star) / eps,
                             -_EXP_CLIP, 0.0))
    lnS = np.log(w @ shifted)
    y = phi_star.copy()
    for _ in range(60):
        expo = np.clip((y - mstar[None, :]) / eps + lnS[None, :],
                       -_EXP_CLIP, _EXP_CLIP)
        ez = np.exp(expo)
        G = y - phi_star - dt * (1.0 - ez)
        if np.abs(G).max() <= tol:
            break
        y = y - G / (1.0 + (dt / eps) * ez)
    return y


def _timegrid(T: float, dt: float, output_times):
    nsteps = max(1, int(math.ceil(T / dt - 1e-12)))
    dt = T / nsteps
    if output_times is None:
        output_times = [0.0, 0.25 * T, 0.5 * T, 0.75 * T, T]
    req = sorted(set(float(t) for t in output_times))
    if req[0] < 0.0 or req[-1] > T * (1.0 + 1e-12):
        raise ValueError("output times must lie in [0, T]")
    snap = np.unique(np.clip(np.round(np.asarray(req) / dt).astype(int),
                             0, nsteps))
    return nsteps, dt, snap


def _space_setup(grid: GridSpec):
    if grid.dimension != 1 or grid.bc != "periodic":
        raise ValueError("the kinetic solvers run on 1-D periodic grids")
    x = grid.axes()[0]
    return x, grid.spacing()[0]


def kinetic_solve(m: VelocityMeasure, phi0: Callable, eps: float, T: float,
                  grid: GridSpec, dt: Optional[float] = None,
                  cfl: float = 0.9, output_times: Optional[Sequence] = None,
                  vlip_tol: float = 0.05, check: bool = True) -> KineticField:
    """March the phase potential to time T on a periodic interval.

    The time step obeys dt <= min(cfl dx / R, eps / 4); the first part is
    the transport CFL, the second keeps the splitting error of the stiff
    exchange under control (the implicit solve itself has no constraint).
    With check=True the comparison bounds and the velocity-Lipschitz growth
    are asserted at every stored time (tolerance 1e-8 and vlip_tol).
    """
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    if T <= 0.0:
        raise ValueError("T must be positive")
    if not 0.0 < cfl <= 1.0:
        raise CflViolation(f"cfl must lie in (0, 1], got {cfl}")
    x, dx = _space_setup(grid)
    R = m.support_radius()
    dt_max = min(cfl * dx / R, eps / 4.0)
    if dt is None:
        dt = dt_max
    elif dt > dt_max * (1.0 + 1e-12):
        raise CflViolation(f"dt={dt} exceeds the stable step {dt_max}")
    nsteps, dt, snap = _timegrid(T, dt, output_times)

    v, w = _velocity_nodes(m)
    u0 = np.asarray(phi0(x), dtype=float)
    lip0 = float(np.abs(np.diff(np.concatenate([u0, u0[:1]]))).max() / dx)
    sup0 = float(np.abs(u0).max())
    phi = np.broadcast_to(u0, (v.size, x.size)).copy()
    lo0, hi0 = float(u0.min()), float(u0.max())
    scale = max(1.0, sup0)
    newton_tol = 1e-13 * scale

    stored = {}
    if 0 in snap:
        stored[0] = phi.copy()
    worst_low = worst_high = 0.0
    worst_vlip_excess = -math.inf
    dv = np.diff(v)
    for k in range(1, nsteps + 1):
        phi = _transport(phi, v, dt, dx)
        phi = _exchange_implicit(phi, w, eps, dt, newton_tol)
        if k in snap:
            stored[k] = phi.copy()
            low = lo0 - float(phi.min())
            high = float(phi.max()) - hi0
            worst_low = max(worst_low, low)
            worst_high = max(worst_high, high)
            if check and (low > 1e-8 * scale or high > 1e-8 * scale):
                raise BoundViolation(
                    f"kinetic field leaves [{lo0}, {hi0}] by "
                    f"{max(low, high)} at step {k}")
            t = k * dt
            vlip = float((np.abs(np.diff(phi, axis=0))
                          / dv[:, None]).max()) if v.size > 1 else 0.0
            bound = t * lip0 * (1.0 + vlip_tol) + 1e-9
            worst_vlip_excess = max(worst_vlip_excess, vlip - bound)
            if check and vlip > bound:
                raise BoundViolation(
                    f"velocity Lipschitz constant {vlip} exceeds "
                    f"{bound} at t={t}")

    times = np.array([k * dt for k in snap])
    vals = np.stack([stored[k] for k in snap])
    report = {"low_excess": worst_low, "high_excess": worst_high,
              "initial_range": (lo0, hi0),
              "vlip_excess": worst_vlip_excess}
    return KineticField(eps=eps, times=times, x=x, vnodes=v, vweights=w,
                        values=vals, lip0=lip0, sup0=sup0,
                        bound_report=report,
                        meta={"scheme": "kinetic_phase", "dt": dt,
                              "steps": nsteps, "cfl": cfl})


def linear_f_solve(m: VelocityMeasure, phi0: Callable, eps: float, T: float,
                   grid: GridSpec, dt: Optional[float] = None,
                   cfl: float = 0.9,
                   output_times: Optional[Sequence] = None) -> KineticField:
    """Same dynamics in the linear variable g = exp(-phi / eps) relative to
    M; the exchange relaxes g toward its velocity average and conserves
    mass to rounding, which is asserted every step.  Raises UnderflowRisk
    when exp(-phi0 / eps) would underflow (sup |phi0| / eps > 600)."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    x, dx = _space_setup(grid)
    u0 = np.asarray(phi0(x), dtype=float)
    if np.abs(u0).max() / eps > 600.0:
        raise UnderflowRisk(
            f"sup |phi0| / eps = {np.abs(u0).max() / eps:.1f} exceeds 600; "
            "the exponential representation would underflow")
    R = m.support_radius()
    dt_max = cfl * dx / R
    if dt is None:
        dt = dt_max
    elif dt > dt_max * (1.0 + 1e-12):
        raise CflViolation(f"dt={dt} exceeds the stable step {dt_max}")
    nsteps, dt, snap = _timegrid(T, dt, output_times)

    v, w = _velocity_nodes(m)
    g = np.exp(-np.broadcast_to(u0, (v.size, x.size)) / eps)
    lam = dt / eps
    mass0 = float((w @ g).sum() * dx)

    stored = {}
    if 0 in snap:
        stored[0] = g.copy()
    for k in range(1, nsteps + 1):
        g = _transport(g, v, dt, dx)
        rho = w @ g
        g = (g + lam * rho[None, :]) / (1.0 + lam)
        mass = float((w @ g).sum() * dx)
        if abs(mass - mass0) > 1e-10 * max(mass0, 1e-300):
            raise BoundViolation(
                f"mass drifted from {mass0} to {mass} at step {k}")
        if k in snap:
            stored[k] = g.copy()

    times = np.array([k * dt for k in snap])
    vals = np.stack([-eps * np.log(stored[k]) for k in snap])
    lip0 = float(np.abs(np.diff(np.concatenate([u0, u0[:1]]))).max() / dx)
    return KineticField(eps=eps, times=times, x=x, vnodes=v, vweights=w,
                        values=vals, lip0=lip0, sup0=float(np.abs(u0).max()),
                        bound_report={"mass0": mass0},
                        meta={"scheme": "linear_f", "dt": dt,
                              "steps": nsteps, "cfl": cfl})


@dataclass
class ConvergenceReport:
    """Sup error against the variational limit and velocity spread, one row
    per eps, eps strictly decreasing."""
    eps: np.ndarray
    sup_error: np.ndarray
    v_spread: np.ndarray
    times: np.ndarray
    meta: dict = field(default_factory=dict)

    def rows(self):
        return [(float(e), float(se), float(vs)) for e, se, vs
                in zip(self.eps, self.sup_error, self.v_spread)]


def convergence_report(m: VelocityMeasure, phi0: Callable,
                       eps_list: Sequence[float], T: float, grid: GridSpec,
                       dt: Optional[float] = None,
                       output_times: Optional[Sequence] = None,
                       vlip_tol: float = 0.05) -> ConvergenceReport:
    """Run the kinetic solver across a decreasing eps ladder and measure the
    distance to the Hopf-Lax field at the stored positive times."""
    eps_arr = np.asarray([float(e) for e in eps_list])
    if eps_arr.size < 2 or np.any(np.diff(eps_arr) >= 0.0):
        raise ValueError("need at least two strictly decreasing eps values")
    probe = kinetic_solve(m, phi0, eps_arr[0], T, grid, dt=dt,
                          output_times=output_times, vlip_tol=vlip_tol)
    tpos = probe.times[probe.times > 0.0]
    ref = hopf_lax_field(m, phi0, tpos,
                         GridSpec(grid.lo, grid.hi, grid.num, grid.bc))
    sup_err = np.empty(eps_arr.size)
    spread = np.empty(eps_arr.size)
    for i, eps in enumerate(eps_arr):
        fld = probe if i == 0 else kinetic_solve(
            m, phi0, eps, T, grid, dt=dt, output_times=output_times,
            vlip_tol=vlip_tol)
        errs = []
        spreads = []
        for j, t in enumerate(fld.times):
            if t <= 0.0:
                continue
            kref = int(np.argmin(np.abs(ref.times - t)))
            errs.append(float(np.abs(fld.values[j]
                                     - ref.values[kref][None, :]).max()))
            spreads.append(fld.velocity_spread(j))
        sup_err[i] = max(errs)
        spread[i] = max(spreads)
    return ConvergenceReport(eps=eps_arr, sup_error=sup_err, v_spread=spread,
                             times=tpos,
                             meta={"T": T, "num": grid.num, "dt": dt,
                                   "scheme": "kinetic_phase vs hopf_lax"})
