"""Shared machinery for the estimate checkers."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np

from ..geometry import ScalarField, bakry_emery, norm_sq, sym_frobenius_sq
from ..model import BoundSet, source_fields
from ..solver import Equation, Trajectory

SQRT2 = math.sqrt(2.0)
K45 = 4.0 * SQRT2 - 1.0

PASS = "pass"
PASS_FLAGS = "pass-with-flags"
FAIL = "fail"


class ParameterError(ValueError):
    def __init__(self, violations: list[str]):
        super().__init__("; ".join(violations))
        self.violations = violations


# -- parameters -------------------------------------------------------------------

# which constraint groups each check needs
_NEEDS = {
    "li_yau_compact": {"m"},
    "li_yau_global": {"m", "alpha", "eps"},
    "li_yau_local": {"m", "alpha", "eps", "R"},
    "harnack": {"m", "alpha", "eps"},
    "hamilton": set(),
    "liouville": set(),
    "hessian_global": {"hess"},
    "hessian_local": {"hess", "R"},
    "ly_hessian": {"m", "alpha", "eps", "hess"},
    "reversed_harnack": {"m", "alpha", "eps", "hess", "reversed"},
    "hamilton_hessian": {"hess"},
    "cd_condition": {"m"},
}

CHECK_NAMES = tuple(_NEEDS)


@dataclass
class EstimateParams:
    m: float = 2.0
    alpha: float = 2.0
    eps: float = 0.5
    beta: float = 1.0
    delta: float = 0.5
    C: float = 1.0
    R: float | None = None
    center: tuple[float, ...] | None = None
    A: float | None = None
    t_min: float | None = None

    def violations(self, check: str, n: int) -> list[str]:
        """Every violated parameter inequality for ``check`` on an n-torus, with the offending values."""
        needs = _NEEDS[check]
        out = []
        if "m" in needs and not self.m >= n:
            out.append(f"m ≥ n = {n} required (m = {self.m})")
        if "alpha" in needs and not self.alpha > 1:
            out.append(f"α > 1 required (alpha = {self.alpha})")
        if "eps" in needs and not 0 < self.eps < 1:
            out.append(f"0 < ε < 1 required (eps = {self.eps})")
        if "hess" in needs:
            if not 0 < self.delta < 1:
                out.append(f"0 < δ < 1 required (delta = {self.delta})")
            else:
                lo = math.sqrt(self.delta / (1 - self.delta))
                if not self.beta >= lo:
                    out.append(f"β ≥ √(δ/(1−δ)) = {lo:.6g} required (beta = {self.beta}, delta = {self.delta})")
            if not self.C > 0:
                out.append(f"C > 0 required (C = {self.C})")
        if "reversed" in needs and self.alpha > 1:
            dmax = 1.0 / (1.0 + K45 ** 2 * self.alpha ** 2)
            bmax = 1.0 / (K45 * self.alpha)
            if not self.delta <= dmax:
                out.append(f"δ ≤ 1/(1+(4√2−1)²α²) = {dmax:.6g} required (delta = {self.delta})")
            if not self.beta < bmax:
                out.append(f"β < 1/((4√2−1)α) = {bmax:.6g} required (beta = {self.beta})")
        if "R" in needs and not (self.R is not None and self.R > 0):
            out.append(f"R > 0 required (R = {self.R})")
        if self.A is not None and not self.A > 0:
            out.append(f"A > 0 required (A = {self.A})")
        return out

    def validate(self, check: str, n: int) -> None:
        v = self.violations(check, n)
        if v:
            raise ParameterError(v)

    def echo(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self).items() if v is not None}


# -- tolerance and reports --------------------------------------------------------------


@dataclass(frozen=True)
class Tolerance:
    tau_abs: float = 1e-9
    tau_disc: float = 10.0

    def value(self, h: float, lhs, rhs) -> float:
        lhs_sup = float(np.max(np.abs(lhs))) if np.size(lhs) else 0.0
        rhs_sup = float(np.max(np.abs(rhs))) if np.size(rhs) else 0.0
        return self.tau_abs + self.tau_disc * h * h * (1.0 + lhs_sup + rhs_sup)


DEFAULT_TOL = Tolerance()


@dataclass
class CheckReport:
    name: str
    params: dict
    t: float | None
    min_margin: float
    argmin: dict
    lhs_max: float
    lhs_min: float
    rhs_max: float
    rhs_min: float
    tolerance: float
    flags: dict = field(default_factory=dict)
    intermediates: dict = field(default_factory=dict)
    verdict: str = PASS
    notes: list = field(default_factory=list)
    margin: np.ndarray | None = field(default=None, repr=False, compare=False)

    @property
    def flagged(self) -> list[str]:
        return [k for k, v in self.flags.items() if not v["ok"]]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "params": self.params,
            "t": self.t,
            "verdict": self.verdict,
            "min_margin": self.min_margin,
            "argmin": self.argmin,
            "lhs": {"max": self.lhs_max, "min": self.lhs_min},
            "rhs": {"max": self.rhs_max, "min": self.rhs_min},
            "tolerance": self.tolerance,
            "flags": self.flags,
            "intermediates": self.intermediates,
            "notes": list(self.notes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CheckReport":
        return cls(d["name"], d["params"], d["t"], d["min_margin"], d["argmin"], d["lhs"]["max"],
                   d["lhs"]["min"], d["rhs"]["max"], d["rhs"]["min"], d["tolerance"], d["flags"],
                   d["intermediates"], d["verdict"], list(d.get("notes", [])))


def flag(ok, witness=None) -> dict:
    return {"ok": bool(ok), "witness": witness}


def verdict_for(min_margin: float, tol: float, flags: dict) -> str:
    if min_margin < -tol:
        return FAIL
    if any(not f["ok"] for f in flags.values()):
        return PASS_FLAGS
    return PASS


def finish(name: str, params: dict, t, grid, lhs, rhs, *, mask=None, flags=None, inter=None,
           tol: Tolerance = DEFAULT_TOL, argmin: dict | None = None, notes=()) -> CheckReport:
    """Assemble a report from LHS/RHS node fields.

    Anything that is not a node field (a scalar or a short vector of
    statistics) needs an explicit ``argmin`` since there is no location.
    """
    lhs, rhs = np.broadcast_arrays(np.asarray(lhs, dtype=float), np.asarray(rhs, dtype=float))
    margin = rhs - lhs
    if mask is not None:
        sel = np.asarray(mask, dtype=bool)
    else:
        sel = np.ones(lhs.shape, dtype=bool)
    if not np.any(sel):
        raise ValueError(f"{name}: empty evaluation set")
    m_sel = np.where(sel, margin, np.inf)
    idx = np.unravel_index(int(np.argmin(m_sel)), m_sel.shape)
    min_margin = float(m_sel[idx])
    flags = dict(flags or {})
    inter = {k: float(v) for k, v in (inter or {}).items()}
    for k, v in inter.items():
        if not math.isfinite(v):
            raise FloatingPointError(f"{name}: intermediate {k} is not finite ({v})")
    tval = tol.value(grid.h, lhs[sel], rhs[sel])
    if argmin is None:
        argmin = {"x": grid.node_position(idx).tolist(), "t": None if t is None else float(t)}
    return CheckReport(
        name=name, params=params, t=None if t is None else float(t),
        min_margin=min_margin, argmin=argmin, notes=list(notes),
        lhs_max=float(np.max(lhs[sel])), lhs_min=float(np.min(lhs[sel])),
        rhs_max=float(np.max(rhs[sel])), rhs_min=float(np.min(rhs[sel])),
        tolerance=tval, flags=flags, intermediates=inter,
        verdict=verdict_for(min_margin, tval, flags), margin=np.where(sel, margin, np.nan),
    )


# -- snapshots -------------------------------------------------------------------


class Snapshot:
    """Derived fields of one solution snapshot; everything is computed lazily once."""

    def __init__(self, eq: Equation, t: float, w: np.ndarray, w_t: np.ndarray | None = None):
        self.eq = eq
        self.grid = eq.grid
        self.t = float(t)
        self.w = np.asarray(w, dtype=float)
        if np.any(self.w <= 0):
            raise ValueError(f"snapshot at t={t} is not strictly positive")
        self.w_t = eq.rhs(self.w, self.t) if w_t is None else np.asarray(w_t, dtype=float)

    @cached_property
    def f(self):
        return self.eq.weight.sample(self.grid, self.t)

    @cached_property
    def q(self):
        return self.eq.potential.sample(self.grid, self.t)

    @cached_property
    def grad_w(self):
        return self.grid.grad(self.w)

    @cached_property
    def hess_w(self):
        return self.grid.hess(self.w)

    @cached_property
    def lf_w(self):
        return self.grid.lap(self.w) - sum(self.f.grad[a] * self.grad_w[a] for a in range(self.grid.dim))

    @cached_property
    def grad_w_sq(self):
        return norm_sq(self.grad_w)

    @cached_property
    def grad_u_sq(self):
        return self.grad_w_sq / self.w ** 2

    @cached_property
    def u_t(self):
        return self.w_t / self.w

    @cached_property
    def hess_w_norm(self):
        return np.sqrt(sym_frobenius_sq(self.hess_w))

    @cached_property
    def src(self):
        return source_fields(self.eq.nl, self.grid, self.w, self.t, self.f.value,
                             self.grad_w, self.hess_w, self.lf_w)

    @cached_property
    def lf_q(self):
        return self.q.lap - sum(self.f.grad[a] * self.q.grad[a] for a in range(self.grid.dim))

    def f_field(self) -> ScalarField:
        return ScalarField(self.grid, np.array(self.f.value), self.t)

    def curvature(self, m: float | None = None, variant: str = "infinity"):
        key = (m, variant)
        cache = self.__dict__.setdefault("_curv", {})
        if key not in cache:
            cache[key] = bakry_emery(self.f_field(), m, variant)
        return cache[key]


def snapshots(eq: Equation, traj: Trajectory) -> list[Snapshot]:
    return [Snapshot(eq, t, w, wt) for t, w, wt in zip(traj.times, traj.w, traj.w_t)]


def window_K(window: list[Snapshot], m: float, mask=None) -> float:
    """Lower-bound constant of Ric_f^{m-n} over a window (optionally restricted to a node mask)."""
    from ..geometry import sym_min_eig
    worst = 0.0
    for s in window:
        c = s.curvature(m, "finite") if m != math.inf else s.curvature(None, "infinity")
        lam = sym_min_eig(c.ricci_f_mn.data if m != math.inf else c.ricci_f.data)
        if mask is not None:
            lam = lam[mask]
        worst = max(worst, float(np.max(-lam)))
        if not s.eq.weight.depends_on_t:
            break
    return worst


def window_K1(window: list[Snapshot]) -> float:
    return window_K(window, math.inf)


def li_yau_source_sup(window: list[Snapshot], m: float, alpha: float, eps: float, mask=None) -> float:
    """Raw (unclamped) sup of mα³(L_f q + L_f G̃)/(2(1-ε)) + α²(α-1)m(|∇q|² + |∇G̃|²)/(1-ε)."""
    best = -math.inf
    for s in window:
        a = s.lf_q + s.src.lf_g_tilde
        b = norm_sq(s.q.grad) + norm_sq(s.src.grad_g_tilde)
        val = m * alpha ** 3 * a / (2 * (1 - eps)) + alpha ** 2 * (alpha - 1) * m * b / (1 - eps)
        if mask is not None:
            val = val[mask]
        best = max(best, float(np.max(val)))
    return best


# -- closed-form constants ----------------------------------------------------------


def lambda_alpha_eps(m: float, alpha: float, eps: float, K: float, source_sup: float = 0.0) -> float:
    """Λ_{α,ε}; a negative square-root argument is clamped to zero (callers flag it)."""
    if not alpha > 1:
        raise ParameterError([f"α > 1 required (alpha = {alpha})"])
    if not 0 < eps < 1:
        raise ParameterError([f"0 < ε < 1 required (eps = {eps})"])
    return (math.sqrt(max(0.0, source_sup)) + m * alpha ** 2 * K / ((1 - eps) * (alpha - 1))
            + m * alpha ** 2 / (2 * (1 - eps)))


def li_yau_local_A(m: float, C1: float, C2: float, R: float, K: float) -> float:
    return ((m - 1) * C1 * (1 + R * math.sqrt(K)) + C2 + 2 * C1 ** 2) / R ** 2


def hamilton_xi(K: float, theta1: float, theta2: float, theta3: float) -> float:
    return 2 * K + theta1 + theta2 + theta3 + 1


def hamilton_eta(b: BoundSet) -> float:
    return 2 * b.K1 + b.K6 + b.K7 + b.theta3 + 1


def hessian_omega(b: BoundSet, C: float, beta: float) -> float:
    return 2 * b.K3 + C * b.K2 + 2 * beta * b.K3


def hessian_lambda(b: BoundSet, C: float) -> float:
    return max(2 * b.K6 + C * b.K1 + b.K7, 2 * b.K1 + 4 * b.K6 + 4 * b.K8)


def hessian_AB(b: BoundSet, C: float, beta: float, delta: float, T: float,
               R: float | None = None) -> tuple[float, float]:
    """The 𝒜 and ℬ assemblies; R = None gives the global (R → ∞) form."""
    om = hessian_omega(b, C, beta)
    lam = hessian_lambda(b, C)
    db = delta * beta
    A = om / (delta * beta ** 2) + (b.K4 + b.K5) / db + C / (db ** 2 * T ** 2)
    if R is not None:
        A += C / (delta ** 4 * beta ** 6 * R ** 4) + C / db ** 2 * (1 / R ** 4 + b.K1 / R ** 2)
    B = (om + lam) / db + 2 * C ** 2 / (db * T ** 2)
    return A, B


def reversed_harnack_exponents(b: BoundSet, p: EstimateParams, Lambda: float, T: float) -> tuple[float, float]:
    """(N₁, N₂): the constant and the 1/t coefficient in ∂t log w ≤ N₁ + N₂/t."""
    A, B = hessian_AB(b, p.C, p.beta, p.delta, T, p.R)
    denom = 1 - K45 * p.beta * p.alpha
    N1 = (b.K6 + b.K7 + K45 * p.beta * Lambda + SQRT2 * math.sqrt(A) + SQRT2 * B) / denom
    N2 = K45 * p.beta * p.m * p.alpha ** 2 / (2 * (1 - p.eps) * denom)
    return N1, N2
