"""Hessian-type checkers: global/local Hessian, Li-Yau and Hamilton type Hessian, reversed Harnack.

All of them bound |Hess w|_F / w and share the 𝒜, ℬ assemblies.  The
time-scale T of a check at time t is t minus the start of the bound
window, i.e. the longest backward cylinder the window supports.
"""
from __future__ import annotations

import math

import numpy as np

from ..geometry import Cutoff, distance_field
from ..model import BoundSet
from .core import (DEFAULT_TOL, K45, SQRT2, CheckReport, EstimateParams, Snapshot, Tolerance,
                   finish, flag, hamilton_eta, hessian_AB, hessian_lambda, hessian_omega,
                   reversed_harnack_exponents)
from .gradient import _lambda_parts, _nearest_snapshot, _require_t, _snap_point, hamilton_ceiling

REQUIRED_C_TOL = 1e-6
REQUIRED_C_CAP = 1e12


def _time_scale(bounds: BoundSet, t: float) -> float:
    T = t - bounds.window[0]
    if not T > 0:
        raise ValueError(f"check time {t} must lie after the bound window start {bounds.window[0]}")
    return T


def required_C(margin_of_C) -> tuple[float, bool]:
    """Smallest C ≥ 0 with margin_of_C(C) ≥ 0, for a margin increasing in C."""
    if margin_of_C(0.0) >= 0:
        return 0.0, True
    hi = 1.0
    while margin_of_C(hi) < 0:
        hi *= 2.0
        if hi > REQUIRED_C_CAP:
            return REQUIRED_C_CAP, False
    lo = 0.0 if hi == 1.0 else hi / 2.0
    while hi - lo > REQUIRED_C_TOL * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if margin_of_C(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi, True


def _hessian_rhs(snap, b, p, T, R):
    def rhs_for(C):
        A, B = hessian_AB(b, C, p.beta, p.delta, T, R)
        return K45 * p.beta * snap.grad_u_sq + SQRT2 * math.sqrt(A) + SQRT2 * B
    return rhs_for


def _assemble(name, snap, p, b, T, lhs, rhs_for, mask, tol, extra_inter=None, R=None):
    rhs = rhs_for(p.C)
    sel = np.ones(snap.grid.shape, bool) if mask is None else mask
    reqC, found = required_C(lambda C: float(np.min((rhs_for(C) - lhs)[sel])))
    A, B = hessian_AB(b, p.C, p.beta, p.delta, T, R)
    inter = {"Omega": hessian_omega(b, p.C, p.beta), "Lambda_hess": hessian_lambda(b, p.C),
             "A_hess": A, "B_hess": B, "T": T, "required_C": reqC, **(extra_inter or {})}
    flags = {"required_C bracketed": flag(found, {"cap": REQUIRED_C_CAP})}
    return finish(name, p.echo(), snap.t, snap.grid, lhs, rhs, mask=mask, flags=flags, inter=inter, tol=tol)


def hessian_global(snap: Snapshot, params: EstimateParams, bounds: BoundSet,
                   tol: Tolerance = DEFAULT_TOL) -> CheckReport:
    """|Hess w|/w ≤ (4√2-1)β|∇w|²/w² + √2𝒜^{1/2} + √2ℬ on the whole torus."""
    p = params
    p.validate("hessian_global", snap.grid.dim)
    _require_t(snap.t, p)
    T = _time_scale(bounds, snap.t)
    lhs = snap.hess_w_norm / snap.w
    return _assemble("hessian_global", snap, p, bounds, T, lhs, _hessian_rhs(snap, bounds, p, T, None),
                     None, tol)


def hessian_local(snap: Snapshot, params: EstimateParams, bounds: BoundSet,
                  tol: Tolerance = DEFAULT_TOL) -> CheckReport:
    """The local form on B(center, R/2), keeping the 1/R⁴ and K1/R² terms."""
    p = params
    p.validate("hessian_local", snap.grid.dim)
    _require_t(snap.t, p)
    if not p.R < min(snap.grid.lengths) / 2:
        raise ValueError(f"R < half the shortest period required (R = {p.R})")
    center = p.center if p.center is not None else tuple(0.0 for _ in range(snap.grid.dim))
    mask = distance_field(center, snap.grid) <= p.R / 2
    T = _time_scale(bounds, snap.t)
    lhs = snap.hess_w_norm / snap.w
    return _assemble("hessian_local", snap, p, bounds, T, lhs, _hessian_rhs(snap, bounds, p, T, p.R),
                     mask, tol, R=p.R)


def ly_hessian(snap: Snapshot, params: EstimateParams, bounds: BoundSet, window=None,
               tol: Tolerance = DEFAULT_TOL) -> CheckReport:
    """|Hess w|/w ≤ (4√2-1)β(Λ + mα²/(2t(1-ε)) + α(w_t/w + q + G/w)) + √2𝒜^{1/2} + √2ℬ."""
    p = params
    p.validate("ly_hessian", snap.grid.dim)
    _require_t(snap.t, p)
    window = window or [snap]
    lam, K, raw = _lambda_parts(window, p.m, p.alpha, p.eps)
    T = _time_scale(bounds, snap.t)
    bracket = (lam + p.m * p.alpha ** 2 / (2 * snap.t * (1 - p.eps))
               + p.alpha * (snap.u_t + snap.q.value + snap.src.G / snap.w))

    def rhs_for(C):
        A, B = hessian_AB(bounds, C, p.beta, p.delta, T, p.R)
        return K45 * p.beta * bracket + SQRT2 * math.sqrt(A) + SQRT2 * B

    lhs = snap.hess_w_norm / snap.w
    rep = _assemble("ly_hessian", snap, p, bounds, T, lhs, rhs_for, None, tol,
                    {"Lambda_alpha_eps": lam, "K": K, "sqrt_argument": raw}, R=p.R)
    rep.flags["sqrt argument ≥ 0"] = flag(raw >= 0, {"raw": raw})
    return rep


def hamilton_hessian(snap: Snapshot, params: EstimateParams, bounds: BoundSet, A: float | None = None,
                     window=None, tol: Tolerance = DEFAULT_TOL) -> CheckReport:
    """|Hess w|/w ≤ (4√2-1)(βA/(ew)){ln(A/w) + (ln(A/w)-1)(θ1+θ2) + K3²/η}(1/t+η) + √2𝒜^{1/2} + √2ℬ."""
    p = params
    p.validate("hamilton_hessian", snap.grid.dim)
    _require_t(snap.t, p)
    window = window or [snap]
    A = hamilton_ceiling(window, A if A is not None else p.A)
    b = bounds
    T = _time_scale(b, snap.t)
    eta = hamilton_eta(b)
    ln = np.log(A / snap.w)
    ham = (K45 * p.beta * A / (math.e * snap.w)
           * (ln + (ln - 1) * (b.theta1 + b.theta2) + b.K3 ** 2 / eta) * (1 / snap.t + eta))

    def rhs_for(C):
        AA, BB = hessian_AB(b, C, p.beta, p.delta, T, p.R)
        return ham + SQRT2 * math.sqrt(AA) + SQRT2 * BB

    lhs = snap.hess_w_norm / snap.w
    return _assemble("hamilton_hessian", snap, p, b, T, lhs, rhs_for, None, tol, {"eta": eta, "A": A}, R=p.R)


def reversed_harnack(window: list[Snapshot], x, t1: float, t2: float, params: EstimateParams,
                     bounds: BoundSet, tol: Tolerance = DEFAULT_TOL) -> CheckReport:
    """log(w(x,t2)/w(x,t1)) ≤ N₁(t2-t1) + N₂ log(t2/t1).

    This is ∂t log w ≤ N₁ + N₂/t integrated over [t1, t2]; 𝒜 uses the time
    scale at t1, the smallest over the interval, so it dominates every
    later instant.
    """
    p = params
    grid = window[0].grid
    p.validate("reversed_harnack", grid.dim)
    if not t1 < t2:
        raise ValueError(f"t1 < t2 required (t1 = {t1}, t2 = {t2})")
    i1, i2 = _nearest_snapshot(window, t1), _nearest_snapshot(window, t2)
    s1, s2 = window[i1], window[i2]
    if not s1.t < s2.t:
        raise ValueError("t1 and t2 snap to the same snapshot")
    _require_t(s1.t, p)
    node, xs = _snap_point(grid, x)
    lam, K, raw = _lambda_parts(window, p.m, p.alpha, p.eps)
    T = _time_scale(bounds, s1.t)
    N1, N2 = reversed_harnack_exponents(bounds, p, lam, T)
    A, B = hessian_AB(bounds, p.C, p.beta, p.delta, T, p.R)
    lhs = math.log(float(s2.w[node]) / float(s1.w[node]))
    dt, lr = s2.t - s1.t, math.log(s2.t / s1.t)
    rhs = N1 * dt + N2 * lr
    inter = {"N1": N1, "N2": N2, "Lambda_alpha_eps": lam, "K": K, "A_hess": A, "B_hess": B, "T": T,
             "sqrt_argument": raw, "rhs_swapped_pairing": N1 * lr + N2 * dt}
    flags = {"sqrt argument ≥ 0": flag(raw >= 0, {"raw": raw})}
    notes = ["N₁ multiplies t2-t1 and N₂ multiplies log(t2/t1), as produced by integrating ∂t log w ≤ N₁ + N₂/t"]
    return finish("reversed_harnack", p.echo(), s1.t, grid, lhs, rhs, flags=flags, inter=inter, tol=tol,
                  argmin={"x": xs.tolist(), "t": s1.t, "t2": s2.t}, notes=notes)


__all__ = ["hamilton_hessian", "hessian_global", "hessian_local", "ly_hessian", "required_C",
           "reversed_harnack"]
