"""Gradient-type checkers: Li-Yau (compact, global, local), Harnack, Hamilton, Liouville, CD(K, m)."""
from __future__ import annotations

import math
from types import SimpleNamespace

import numpy as np
from scipy.integrate import trapezoid
from scipy.ndimage import map_coordinates

from ..geometry import (Cutoff, ScalarField, dot, norm_sq, sym_min_eig, sym_outer,
                        wrapped_delta)
from ..model import BoundSet, sample_bounds
from .core import (DEFAULT_TOL, FAIL, PASS_FLAGS, CheckReport, EstimateParams, Snapshot,
                   Tolerance, finish, flag, hamilton_xi, lambda_alpha_eps, li_yau_local_A,
                   li_yau_source_sup, window_K, window_K1)

HARNACK_MIN_SUBINTERVALS = 64
HARNACK_SAMPLED_PATHS = 32
HARNACK_CADENCE = 16


def window_bounds(window: list[Snapshot]) -> BoundSet:
    """BoundSet over every snapshot of the window."""
    s0 = window[0]
    traj = SimpleNamespace(grid=s0.grid, times=[s.t for s in window], w=[s.w for s in window])
    if s0.eq.weight.depends_on_t:
        curv = [s.curvature() for s in window]
    else:
        curv = s0.curvature()
    return sample_bounds(traj, s0.eq.potential, s0.eq.nl, curv)


def _require_t(t: float, params: EstimateParams | None = None) -> None:
    if not t > 0:
        raise ValueError(f"t > 0 required (t = {t})")
    if params is not None and params.t_min is not None and t < params.t_min:
        raise ValueError(f"t ≥ t_min required (t = {t}, t_min = {params.t_min})")


def _lambda_parts(window, m, alpha, eps, mask=None):
    K = window_K(window, m, mask)
    raw = li_yau_source_sup(window, m, alpha, eps, mask)
    lam = lambda_alpha_eps(m, alpha, eps, K, raw)
    return lam, K, raw


# -- Li-Yau ------------------------------------------------------------------------


def li_yau_compact(snap: Snapshot, m: float, K: float | None = None, window=None,
                   tol: Tolerance = DEFAULT_TOL) -> CheckReport:
    """|∇w|²/w² - 2w_t/w - 2G/w ≤ m/t + √(2m|L_f G̃|) + mK, pointwise."""
    EstimateParams(m=m).validate("li_yau_compact", snap.grid.dim)
    _require_t(snap.t)
    window = window or [snap]
    if K is None:
        K = window_K(window, m)
    lhs = snap.grad_u_sq - 2.0 * snap.u_t - 2.0 * snap.src.G / snap.w
    lfg = snap.src.lf_g_tilde
    rhs = m / snap.t + np.sqrt(2.0 * m * np.abs(lfg)) + m * K
    i = np.unravel_index(int(np.argmin(lfg)), lfg.shape)
    qmax = max(float(np.max(np.abs(s.q.value))) for s in window)
    flags = {
        "L_f G̃ ≥ 0": flag(np.min(lfg) >= 0, {"min": float(lfg[i]), "x": snap.grid.node_position(i).tolist()}),
        "q ≡ 0": flag(qmax == 0.0, {"sup|q|": qmax}),
    }
    return finish("li_yau_compact", {"m": m, "K": K}, snap.t, snap.grid, lhs, rhs,
                  flags=flags, inter={"K": K}, tol=tol)


def li_yau_global(snap: Snapshot, params: EstimateParams, window=None,
                  tol: Tolerance = DEFAULT_TOL) -> CheckReport:
    """|∇u|² - αu_t - αq - αG̃ ≤ mα²/(2t(1-ε)) + Λ_{α,ε}."""
    p = params
    p.validate("li_yau_global", snap.grid.dim)
    _require_t(snap.t, p)
    window = window or [snap]
    lam, K, raw = _lambda_parts(window, p.m, p.alpha, p.eps)
    lhs = snap.grad_u_sq - p.alpha * (snap.u_t + snap.q.value + snap.src.g_tilde)
    rhs = np.full(snap.grid.shape, p.m * p.alpha ** 2 / (2 * snap.t * (1 - p.eps)) + lam)
    flags = {"sqrt argument ≥ 0": flag(raw >= 0, {"raw": raw})}
    return finish("li_yau_global", p.echo(), snap.t, snap.grid, lhs, rhs, flags=flags,
                  inter={"Lambda_alpha_eps": lam, "K": K, "sqrt_argument": raw}, tol=tol)


def li_yau_local(snap: Snapshot, params: EstimateParams, cutoff: Cutoff, window=None,
                 tol: Tolerance = DEFAULT_TOL) -> CheckReport:
    """Li-Yau bound on B_p(2R) with the cutoff constant A and the 1/(εR²) term.

    K and the source supremum are restricted to the ball.  The cutoff's
    Laplacian comparison L_f φ ≥ -((m-1)C1(1+R√K)+C2)/R² is verified on the
    grid; where it fails A is enlarged to the observed value and flagged.
    """
    p = params
    p.validate("li_yau_local", snap.grid.dim)
    _require_t(snap.t, p)
    if not math.isclose(cutoff.R, p.R):
        raise ValueError(f"cutoff radius {cutoff.R} differs from R = {p.R}")
    window = window or [snap]
    R, C1, C2, m, a, e = cutoff.R, cutoff.C1, cutoff.C2, p.m, p.alpha, p.eps
    ball = cutoff.distance <= 2 * R
    lam, K, raw = _lambda_parts(window, m, a, e, ball)
    A_const = li_yau_local_A(m, C1, C2, R, K)
    lf_phi_inf = min(float(np.min(s.grid.lap_f(cutoff.phi.data, s.f.value, s.f.grad))) for s in window)
    comparison = -((m - 1) * C1 * (1 + R * math.sqrt(K)) + C2) / R ** 2
    comparison_ok = lf_phi_inf >= comparison - tol.tau_disc * snap.grid.h ** 2
    A_used = A_const if comparison_ok else max(A_const, -lf_phi_inf + 2 * C1 ** 2 / R ** 2)
    extra = (m * a ** 2 * A_used / (2 * (1 - e))
             + m ** 2 * a ** 4 * C1 ** 2 / (4 * e * R ** 2 * (1 - e) * (a - 1)))
    rhs_val = m * a ** 2 / (2 * snap.t * (1 - e)) + lam + extra
    lhs = snap.grad_u_sq - a * (snap.u_t + snap.q.value + snap.src.g_tilde)
    rhs = np.full(snap.grid.shape, rhs_val)
    flags = {
        "sqrt argument ≥ 0": flag(raw >= 0, {"raw": raw}),
        "cutoff Laplacian comparison": flag(comparison_ok, {"inf L_f φ": lf_phi_inf, "bound": comparison}),
    }
    inter = {"Lambda_alpha_eps": lam, "K": K, "A_const": A_const, "A_used": A_used, "C1": C1, "C2": C2,
             "local_extra": extra, "sqrt_argument": raw}
    return finish("li_yau_local", p.echo(), snap.t, snap.grid, lhs, rhs, mask=ball, flags=flags,
                  inter=inter, tol=tol)


# -- Harnack -----------------------------------------------------------------------


def _nearest_snapshot(window, t):
    times = np.array([s.t for s in window])
    return int(np.argmin(np.abs(times - t)))


def _snap_point(grid, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (grid.dim,) or not np.all(np.isfinite(x)):
        raise ValueError(f"point {x.tolist()} is not a point of the {grid.dim}-torus")
    idx = grid.nearest_node(x)
    return idx, grid.node_position(idx)


def _interp_space(grid, field, pts):
    """Periodic bilinear interpolation of a node field at physical points (shape (k, d))."""
    coords = np.stack([pts[:, a] / grid.spacing[a] for a in range(grid.dim)])
    return map_coordinates(field, coords, order=1, mode="grid-wrap")


def _paths(x1, disp, taus, t1, t2, policy, rng, lengths):
    """Positions (npath, ntau, d) of the straight path plus optional perturbed ones."""
    lam = (taus - t1) / (t2 - t1)
    straight = x1[None, :] + lam[:, None] * disp[None, :]
    paths = [straight]
    if policy == "sampled":
        knots_t = np.linspace(0.0, 1.0, 5)
        scale = 0.25 * max(float(np.linalg.norm(disp)), min(lengths) / 16)
        for _ in range(HARNACK_SAMPLED_PATHS):
            knots = x1[None, :] + knots_t[:, None] * disp[None, :]
            knots[1:-1] += rng.normal(scale=scale, size=(3, len(x1)))
            paths.append(np.stack([np.interp(lam, knots_t, knots[:, a]) for a in range(len(x1))], axis=1))
    return np.stack(paths)


def _kinetic(path, taus):
    """∫ ½|γ̇|² for a path that is linear between consecutive quadrature times."""
    v = np.diff(path, axis=0) / np.diff(taus)[:, None]
    return float(np.sum(0.5 * np.sum(v * v, axis=1) * np.diff(taus)))


def harnack_bound(window: list[Snapshot], p1, p2, params: EstimateParams, path_policy: str = "straight",
                  n_sub: int = HARNACK_MIN_SUBINTERVALS, seed: int = 0,
                  tol: Tolerance = DEFAULT_TOL) -> CheckReport:
    """log(w(x1,t1)/w(x2,t2)) ≤ (mα/(2(1-ε))) log(t2/t1) + ∫ (Λ/α + (α-2)/(2α)|∇u|² + ½|γ̇|² - q - G̃) dt.

    Points snap to the nearest node and times to the nearest snapshot; the
    integral runs along the straight torus geodesic (``"straight"``) or the
    best of it and 32 random detours (``"sampled"``).
    """
    p = params
    grid = window[0].grid
    p.validate("harnack", grid.dim)
    if path_policy not in ("straight", "sampled"):
        raise ValueError(f"unknown path policy {path_policy!r}")
    (x1, t1), (x2, t2) = p1, p2
    if not t1 < t2:
        raise ValueError(f"t1 < t2 required (t1 = {t1}, t2 = {t2})")
    i1, i2 = _nearest_snapshot(window, t1), _nearest_snapshot(window, t2)
    s1, s2 = window[i1], window[i2]
    t1, t2 = s1.t, s2.t
    if not t1 < t2:
        raise ValueError("t1 and t2 snap to the same snapshot")
    _require_t(t1, p)
    n1, x1 = _snap_point(grid, x1)
    n2, x2 = _snap_point(grid, x2)
    span = [s.t for s in window[i1:i2 + 1]]
    gap = max(np.diff(span))
    if gap > (t2 - t1) / HARNACK_CADENCE * (1 + 1e-9):
        raise ValueError(f"snapshot spacing {gap:.4g} exceeds (t2-t1)/{HARNACK_CADENCE} = {(t2 - t1) / HARNACK_CADENCE:.4g}")
    n_sub = max(int(n_sub), HARNACK_MIN_SUBINTERVALS)
    n_sub += (-n_sub) % 4
    lam, K, raw = _lambda_parts(window, p.m, p.alpha, p.eps)
    a = p.alpha
    fields = [(a - 2) / (2 * a) * s.grad_u_sq - s.q.value - s.src.g_tilde for s in window[i1:i2 + 1]]
    taus = np.linspace(t1, t2, n_sub + 1)
    disp = wrapped_delta(x1, x2, grid.lengths)
    rng = np.random.default_rng(seed)
    paths = _paths(x1, disp, taus, t1, t2, path_policy, rng, grid.lengths)
    # integrand along every path at each quadrature time, linear in time between snapshots
    span = np.array(span)
    vals = np.empty((paths.shape[0], taus.size))
    for k, tau in enumerate(taus):
        j = min(int(np.searchsorted(span, tau, side="right")) - 1, len(span) - 2)
        wgt = (tau - span[j]) / (span[j + 1] - span[j])
        pts = paths[:, k, :]
        vals[:, k] = ((1 - wgt) * _interp_space(grid, fields[j], pts)
                      + wgt * _interp_space(grid, fields[j + 1], pts))
    field_part = trapezoid(vals, taus, axis=1)
    kinetic = np.array([_kinetic(path, taus) for path in paths])
    integrals = lam / a * (t2 - t1) + field_part + kinetic
    E = float(np.min(integrals))
    expo = p.m * a / (2 * (1 - p.eps))
    lhs = math.log(float(s1.w[n1]) / float(s2.w[n2]))
    rhs = expo * math.log(t2 / t1) + E
    inter = {
        "Lambda_alpha_eps": lam, "K": K, "sqrt_argument": raw, "exponent_integral": E,
        "straight_integral": float(integrals[0]), "prefactor_exponent": expo,
        "ratio": math.exp(lhs), "bound": math.exp(rhs),
        "bound_with_t1_over_t2_prefactor": math.exp(-expo * math.log(t2 / t1) + E),
    }
    flags = {"sqrt argument ≥ 0": flag(raw >= 0, {"raw": raw})}
    notes = ["time prefactor (t2/t1)^{mα/(2(1-ε))} as obtained by integrating the Li-Yau bound",
             "potential term evaluated as G̃ = G(w)/w"]
    argmin = {"x": x1.tolist(), "t": t1, "x2": x2.tolist(), "t2": t2}
    return finish("harnack", dict(p.echo(), path_policy=path_policy), t1, grid, lhs, rhs, flags=flags,
                  inter=inter, tol=tol, argmin=argmin, notes=notes)


# -- Hamilton ---------------------------------------------------------------------


def hamilton_ceiling(window: list[Snapshot], A: float | None) -> float:
    sup_w = max(float(np.max(s.w)) for s in window)
    if A is None:
        return math.e * (1 + 1e-6) * sup_w
    if sup_w > A / math.e:
        raise ValueError(f"ceiling violated: sup w = {sup_w:.6g} > A/e = {A / math.e:.6g}")
    return float(A)


def hamilton_bound(snap: Snapshot, bounds: BoundSet, A: float | None = None, K: float | None = None,
                   window=None, tol: Tolerance = DEFAULT_TOL) -> CheckReport:
    """|∇w|²/w ≤ (A/e)((ln(A/w)-1)(θ1+θ2) + ln(A/w) + θ4²/ξ)(1/t + ξ)."""
    _require_t(snap.t)
    window = window or [snap]
    A = hamilton_ceiling(window, A)
    if K is None:
        K = bounds.K1
    b = bounds
    xi = hamilton_xi(K, b.theta1, b.theta2, b.theta3)
    ln = np.log(A / snap.w)
    rhs = (A / math.e) * ((ln - 1) * (b.theta1 + b.theta2) + ln + b.theta4 ** 2 / xi) * (1 / snap.t + xi)
    lhs = snap.grad_w_sq / snap.w
    flags = {f"{k} ({b.provenance.get(k, 'sampled')})": flag(True, b.provenance.get(k, "sampled"))
             for k in ("theta1", "theta2", "theta3", "theta4")}
    inter = {"xi": xi, "A": A, "K": K, **{k: getattr(b, k) for k in ("theta1", "theta2", "theta3", "theta4")}}
    return finish("hamilton", {"A": A, "K": K}, snap.t, snap.grid, lhs, rhs, flags=flags, inter=inter, tol=tol)


# -- Liouville --------------------------------------------------------------------


def liouville_assess(window: list[Snapshot], threshold: float = 1e-8, tail_fraction: float = 0.5,
                     tol: Tolerance = DEFAULT_TOL) -> CheckReport:
    """Decay of sup|∇w|²/w and of max w - min w towards a constant.

    Margins: threshold minus each final statistic, and minus the largest
    increase of either statistic over the trajectory tail.  A scenario
    outside the theorem's hypotheses (q or G not zero, Ric_f not ≥ 0) can
    only earn pass-with-flags.
    """
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    grid = window[-1].grid
    grad_stat = np.array([float(np.max(s.grad_w_sq / s.w)) for s in window])
    osc = np.array([float(np.max(s.w) - np.min(s.w)) for s in window])
    start = min(int(len(window) * (1 - tail_fraction)), len(window) - 1)
    rise = 0.0
    for stat in (grad_stat, osc):
        tail = stat[start:]
        if tail.size > 1:
            rise = max(rise, float(np.max(np.diff(tail))))
    lhs = np.array([grad_stat[-1], osc[-1], rise])
    rhs = np.array([threshold, threshold, 0.0])
    qmax = max(float(np.max(np.abs(s.q.value))) for s in window)
    gmax = max(float(np.max(np.abs(s.src.G))) for s in window)
    K1 = window_K1(window)
    flags = {
        "q ≡ 0": flag(qmax == 0.0, {"sup|q|": qmax}),
        "G ≡ 0": flag(gmax == 0.0, {"sup|G|": gmax}),
        "Ric_f ≥ 0": flag(K1 <= 1e-12, {"K1": K1}),
    }
    inter = {"final_grad_stat": grad_stat[-1], "final_oscillation": osc[-1], "tail_max_increase": rise,
             "threshold": threshold}
    rep = finish("liouville", {"threshold": threshold, "tail_fraction": tail_fraction}, window[-1].t, grid,
                 lhs, rhs, flags=flags, inter=inter, tol=tol, argmin={"x": None, "t": window[-1].t})
    if rep.flagged and rep.verdict == FAIL:
        rep.verdict = PASS_FLAGS
        rep.notes.append("hypotheses not met: verdict capped at pass-with-flags")
    return rep


# -- curvature-dimension condition ------------------------------------------------


def cd_condition(u: ScalarField, f: ScalarField, m: float, K: float,
                 tol: Tolerance = DEFAULT_TOL) -> CheckReport:
    """½L_f|∇u|² - <∇u, ∇L_f u> ≥ (L_f u)²/m + K|∇u|² pointwise.

    K is the signed lower bound of Ric_f^{m-n}; the hypothesis flag checks it
    against the discrete tensor.
    """
    if u.grid != f.grid:
        raise ValueError("u and f live on different grids")
    g = u.grid
    n = g.dim
    gf = g.grad(f.data)
    gu = g.grad(u.data)
    lfu = g.lap_f(u.data, f.data, gf)
    rhs = 0.5 * g.lap_f(norm_sq(gu), f.data, gf) - dot(gu, g.grad(lfu))
    lhs = lfu * lfu / m + K * norm_sq(gu)
    if m > n:
        lam = float(np.min(sym_min_eig(g.hess(f.data) - sym_outer(gf) / (m - n))))
        ok, why = lam >= K - 1e-12, {"min eig": lam}
    elif m == n and not np.any(gf):
        lam = float(np.min(sym_min_eig(g.hess(f.data))))
        ok, why = lam >= K - 1e-12, {"min eig": lam}
    else:
        ok, why = False, {"reason": f"m = {m} needs m > n = {n} (or m = n with constant f)"}
    return finish("cd_condition", {"m": m, "K": K}, u.t, g, lhs, rhs,
                  flags={"Ric_f^{m-n} ≥ K": flag(ok, why)}, inter={"K": K}, tol=tol)


__all__ = [
    "cd_condition", "hamilton_bound", "hamilton_ceiling", "harnack_bound", "li_yau_compact",
    "li_yau_global", "li_yau_local", "liouville_assess", "window_bounds",
]
