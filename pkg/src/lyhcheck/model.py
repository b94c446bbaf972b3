"""Equation data: weight f, potential q, nonlinearity G and bound constants.

Every derivative of G̃ = G(w)/w is taken by the chain rule from G, G' and
G'' pushed through the discrete operators of :mod:`lyhcheck.geometry`:

    ∇G̃   = G̃_w ∇w
    L_f G̃ = G̃_w L_f w + G̃_ww |∇w|²

The Caffarelli-Lin case G = λ(t) w + A(x, t) carries explicit x-dependence
and is handled by the product rule instead.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Mapping

import numpy as np
from scipy.interpolate import CubicSpline

from .expr import Expr
from .geometry import (
    CurvatureData, Grid, ScalarField, VectorField, dot, norm_sq, sym_frobenius_sq, sym_outer,
)


class DomainError(ValueError):
    """Nonlinearity evaluated outside the range where it is defined."""


# -- weight and potential -------------------------------------------------------


@dataclass(frozen=True)
class SampledFunction:
    value: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    lap: np.ndarray


@dataclass(frozen=True)
class _SpaceTimeFunction:
    expr: Expr

    def __init__(self, expr="0"):
        object.__setattr__(self, "expr", Expr.parse(expr))

    @property
    def depends_on_t(self) -> bool:
        return self.expr.depends_on_t

    @property
    def is_constant(self) -> bool:
        return self.expr.is_constant

    def sample(self, grid: Grid, t: float = 0.0) -> SampledFunction:
        return _sample(self.expr, grid, float(t) if self.depends_on_t else 0.0)

    def value(self, grid: Grid, t: float = 0.0) -> np.ndarray:
        return self.sample(grid, t).value

    def field(self, grid: Grid, t: float = 0.0) -> ScalarField:
        return ScalarField(grid, self.value(grid, t).copy(), t)


@lru_cache(maxsize=256)
def _sample(expr: Expr, grid: Grid, t: float) -> SampledFunction:
    v = expr.on_grid(grid, t)
    parts = [v, grid.grad(v), grid.hess(v), grid.lap(v)]
    for p in parts:
        p.setflags(write=False)
    return SampledFunction(*parts)


class WeightSpec(_SpaceTimeFunction):
    """The weight f of the measure e^{-f} dμ."""


class PotentialSpec(_SpaceTimeFunction):
    """The potential q(x, t)."""


# -- nonlinearity catalog --------------------------------------------------------

CATALOG = {
    "zero": ((), "G = 0"),
    "power_diff": (("a", "b", "p", "q"), "G = a w^p - b w^q;  a, b > 0,  q > p >= 1"),
    "caffarelli_lin": (("A",), "G = λ(t) w + A(x,t),  λ = -∫(wΔw + wA) dμ"),
    "pure_power": (("b",), "G = |w|^(b-1) w;  b > 1"),
    "log_power": (("a", "alpha"), "G = a w (log w)^alpha;  w kept away from 1 when alpha < 2"),
    "allen_cahn": (("c",), "G = c w (1 - w^2);  c > 0,  0 < w < 1"),
    "fisher_kpp": (("c",), "G = c w (1 - w);  c > 0,  0 < w < 1"),
    "custom_table": (("w", "g", "g_prime", "g_second"), "cubic interpolation of tabulated (w, G, G', G'')"),
}


def _log_pow(logw, k):
    """(log w)^k, refusing complex or singular values."""
    if float(k).is_integer():
        if k < 0 and np.any(logw == 0):
            raise DomainError(f"(log w)^{k} is singular at w = 1")
        return logw ** int(k)
    if np.any(logw < 0):
        raise DomainError(f"(log w)^{k} undefined for w < 1 with non-integer exponent")
    if k < 0 and np.any(logw == 0):
        raise DomainError(f"(log w)^{k} is singular at w = 1")
    with np.errstate(divide="ignore"):
        return np.where(logw > 0, np.abs(logw) ** k, 0.0)


@dataclass(frozen=True)
class Nonlinearity:
    case: str = "zero"
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        if self.case not in CATALOG:
            raise ValueError(f"unknown nonlinearity case {self.case!r}; known: {sorted(CATALOG)}")
        required, _ = CATALOG[self.case]
        missing = [k for k in required if k not in self.params]
        if missing:
            raise ValueError(f"{self.case} needs parameters {missing}")
        errors = self.parameter_errors()
        if errors:
            raise ValueError("; ".join(errors))
        if self.case == "caffarelli_lin":
            object.__setattr__(self, "params", {**self.params, "A": Expr.parse(self.params["A"])})
        if self.case == "custom_table":
            self._build_table()

    def parameter_errors(self) -> list[str]:
        p = self.params
        errs = []
        if self.case == "power_diff":
            if not (p["a"] > 0 and p["b"] > 0):
                errs.append("power_diff requires a > 0 and b > 0")
            if not (p["q"] > p["p"] >= 1):
                errs.append("power_diff requires q > p >= 1")
        elif self.case == "pure_power" and not p["b"] > 1:
            errs.append("pure_power requires b > 1")
        elif self.case in ("allen_cahn", "fisher_kpp") and not p["c"] > 0:
            errs.append(f"{self.case} requires c > 0")
        elif self.case == "custom_table":
            w = np.asarray(p["w"], dtype=float)
            if w.ndim != 1 or len(w) < 4:
                errs.append("custom_table needs at least 4 samples")
            elif np.any(np.diff(w) <= 0):
                errs.append("custom_table w samples must be strictly increasing")
            elif any(len(p[k]) != len(w) for k in ("g", "g_prime", "g_second")):
                errs.append("custom_table columns must have equal length")
        return errs

    def _build_table(self):
        p = self.params
        w = np.asarray(p["w"], dtype=float)
        splines = tuple(CubicSpline(w, np.asarray(p[k], dtype=float)) for k in ("g", "g_prime", "g_second"))
        object.__setattr__(self, "_splines", splines)

    @property
    def is_zero(self) -> bool:
        return self.case == "zero"

    # -- scalar evaluation; ``lam`` and ``a`` are only read by caffarelli_lin ----

    def check_domain(self, w) -> None:
        w = np.asarray(w, dtype=float)
        if self.case == "custom_table":
            lo, hi = self.params["w"][0], self.params["w"][-1]
            if np.any(w < lo) or np.any(w > hi):
                raise DomainError(f"w outside tabulated range [{lo}, {hi}]")
            return
        if np.any(w <= 0):
            raise DomainError(f"{self.case}: w must be positive (min w = {np.min(w):.3g})")
        if self.case in ("allen_cahn", "fisher_kpp") and np.any(w >= 1):
            raise DomainError(f"{self.case}: w must stay below 1 (max w = {np.max(w):.6g})")

    def g(self, w, lam=0.0, a=0.0):
        self.check_domain(w)
        w = np.asarray(w, dtype=float)
        p = self.params
        c = self.case
        if c == "zero":
            return np.zeros_like(w)
        if c == "power_diff":
            return p["a"] * w ** p["p"] - p["b"] * w ** p["q"]
        if c == "caffarelli_lin":
            return lam * w + a
        if c == "pure_power":
            return np.abs(w) ** (p["b"] - 1) * w
        if c == "log_power":
            return p["a"] * w * _log_pow(np.log(w), p["alpha"])
        if c == "allen_cahn":
            return p["c"] * w * (1.0 - w * w)
        if c == "fisher_kpp":
            return p["c"] * w * (1.0 - w)
        return self._splines[0](w)

    def g_prime(self, w, lam=0.0, a=0.0):
        self.check_domain(w)
        w = np.asarray(w, dtype=float)
        p = self.params
        c = self.case
        if c == "zero":
            return np.zeros_like(w)
        if c == "power_diff":
            return p["a"] * p["p"] * w ** (p["p"] - 1) - p["b"] * p["q"] * w ** (p["q"] - 1)
        if c == "caffarelli_lin":
            return np.full_like(w, lam)
        if c == "pure_power":
            return p["b"] * w ** (p["b"] - 1)
        if c == "log_power":
            L = np.log(w)
            al = p["alpha"]
            return p["a"] * (_log_pow(L, al) + al * _log_pow(L, al - 1))
        if c == "allen_cahn":
            return p["c"] * (1.0 - 3.0 * w * w)
        if c == "fisher_kpp":
            return p["c"] * (1.0 - 2.0 * w)
        return self._splines[1](w)

    def g_second(self, w, lam=0.0, a=0.0):
        self.check_domain(w)
        w = np.asarray(w, dtype=float)
        p = self.params
        c = self.case
        if c in ("zero", "caffarelli_lin"):
            return np.zeros_like(w)
        if c == "power_diff":
            return (p["a"] * p["p"] * (p["p"] - 1) * w ** (p["p"] - 2)
                    - p["b"] * p["q"] * (p["q"] - 1) * w ** (p["q"] - 2))
        if c == "pure_power":
            return p["b"] * (p["b"] - 1) * w ** (p["b"] - 2)
        if c == "log_power":
            L = np.log(w)
            al = p["alpha"]
            return p["a"] * al * (_log_pow(L, al - 1) + (al - 1) * _log_pow(L, al - 2)) / w
        if c == "allen_cahn":
            return -6.0 * p["c"] * w
        if c == "fisher_kpp":
            return np.full_like(w, -2.0 * p["c"])
        return self._splines[2](w)

    def g_tilde(self, w, lam=0.0, a=0.0):
        w = np.asarray(w, dtype=float)
        return self.g(w, lam, a) / w

    def g_tilde_dw(self, w, lam=0.0, a=0.0):
        w = np.asarray(w, dtype=float)
        return self.g_prime(w, lam, a) / w - self.g(w, lam, a) / (w * w)

    def g_tilde_dww(self, w, lam=0.0, a=0.0):
        w = np.asarray(w, dtype=float)
        g, g1, g2 = self.g(w, lam, a), self.g_prime(w, lam, a), self.g_second(w, lam, a)
        return g2 / w - 2.0 * g1 / w ** 2 + 2.0 * g / w ** 3

    def analytic_bounds(self) -> dict[str, float]:
        """Closed-form θ₂ = sup|G|/w and θ₃ = sup|G'| over the admissible range."""
        if self.case == "zero":
            return {"theta2": 0.0, "theta3": 0.0}
        if self.case == "fisher_kpp":
            return {"theta2": float(self.params["c"]), "theta3": float(self.params["c"])}
        if self.case == "allen_cahn":
            return {"theta2": float(self.params["c"]), "theta3": 2.0 * float(self.params["c"])}
        return {}

    def describe(self) -> dict:
        out = {"case": self.case}
        for k, v in self.params.items():
            if isinstance(v, Expr):
                out[k] = v.normalized()
            elif np.ndim(v):
                out[k] = [float(x) for x in v]
            else:
                out[k] = float(v)
        return out


def g_eval(nl: Nonlinearity, w):
    return nl.g(w)


def g_prime(nl: Nonlinearity, w):
    return nl.g_prime(w)


def g_tilde(nl: Nonlinearity, w):
    return nl.g_tilde(w)


def g_tilde_prime_w(nl: Nonlinearity, w):
    return nl.g_tilde_dw(w)


# -- field-level source terms ----------------------------------------------------


def caffarelli_lin_lambda(w: ScalarField | np.ndarray, A: ScalarField | np.ndarray, grid: Grid | None = None) -> float:
    """λ(t) = -∫ (w Δw + w A) dμ on the unweighted volume, by Riemann sum."""
    if isinstance(w, ScalarField):
        grid = w.grid
        w = w.data
    if isinstance(A, ScalarField):
        A = A.data
    return -grid.integrate(w * grid.lap(w) + w * A)


def l2_norm_sq(w: np.ndarray, grid: Grid) -> float:
    return grid.integrate(w * w)


@dataclass
class SourceFields:
    """G and G̃ related fields of one snapshot."""

    G: np.ndarray
    G_prime: np.ndarray
    g_tilde: np.ndarray
    grad_g_tilde: np.ndarray
    lf_g_tilde: np.ndarray
    grad_G: np.ndarray
    hess_G: np.ndarray
    lam: float | None = None


def caffarelli_terms(nl: Nonlinearity, grid: Grid, w: np.ndarray, t: float):
    A = _sample(nl.params["A"], grid, float(t) if nl.params["A"].depends_on_t else 0.0)
    return caffarelli_lin_lambda(w, A.value, grid), A


def source_value(nl: Nonlinearity, grid: Grid, w: np.ndarray, t: float) -> np.ndarray:
    """G(w(x), x, t) as used by the time stepper."""
    if nl.case == "caffarelli_lin":
        nl.check_domain(w)
        lam, A = caffarelli_terms(nl, grid, w, t)
        return lam * w + A.value
    return nl.g(w)


def source_fields(nl: Nonlinearity, grid: Grid, w: np.ndarray, t: float, f: np.ndarray,
                  grad_w: np.ndarray | None = None, hess_w: np.ndarray | None = None,
                  lf_w: np.ndarray | None = None) -> SourceFields:
    grad_f = grid.grad(f)
    if grad_w is None:
        grad_w = grid.grad(w)
    if hess_w is None:
        hess_w = grid.hess(w)
    if lf_w is None:
        lf_w = grid.lap(w) - dot(grad_f, grad_w)
    gw2 = norm_sq(grad_w)
    if nl.case == "caffarelli_lin":
        nl.check_domain(w)
        lam, A = caffarelli_terms(nl, grid, w, t)
        a, ga = A.value, A.grad
        lf_a = A.lap - dot(grad_f, ga)
        G = lam * w + a
        gt = lam + a / w
        grad_gt = ga / w - a * grad_w / w ** 2
        lf_gt = lf_a / w + a * (-lf_w / w ** 2 + 2.0 * gw2 / w ** 3) - 2.0 * dot(ga, grad_w) / w ** 2
        return SourceFields(G, np.full_like(w, lam), gt, grad_gt, lf_gt,
                            lam * grad_w + ga, lam * hess_w + A.hess, lam)
    G = nl.g(w)
    g1 = nl.g_prime(w)
    g2 = nl.g_second(w)
    d1 = g1 / w - G / w ** 2
    d2 = g2 / w - 2.0 * g1 / w ** 2 + 2.0 * G / w ** 3
    return SourceFields(
        G=G,
        G_prime=g1,
        g_tilde=G / w,
        grad_g_tilde=d1 * grad_w,
        lf_g_tilde=d1 * lf_w + d2 * gw2,
        grad_G=g1 * grad_w,
        hess_G=g2 * sym_outer(grad_w) + g1 * hess_w,
    )


def g_tilde_gradient_field(nl: Nonlinearity, w: ScalarField) -> VectorField:
    sf = source_fields(nl, w.grid, w.data, w.t, np.zeros(w.grid.shape))
    return VectorField(w.grid, sf.grad_g_tilde, w.t)


def g_tilde_weighted_laplacian_field(nl: Nonlinearity, w: ScalarField, f: ScalarField) -> ScalarField:
    sf = source_fields(nl, w.grid, w.data, w.t, f.data)
    return ScalarField(w.grid, sf.lf_g_tilde, w.t)


# -- bound constants ---------------------------------------------------------------

BOUND_NAMES = ("theta1", "theta2", "theta3", "theta4", "K1", "K2", "K3", "K4", "K5", "K6", "K7", "K8")


@dataclass
class BoundSet:
    theta1: float = 0.0
    theta2: float = 0.0
    theta3: float = 0.0
    theta4: float = 0.0
    K1: float = 0.0
    K2: float = 0.0
    K3: float = 0.0
    K4: float = 0.0
    K5: float = 0.0
    K6: float = 0.0
    K7: float = 0.0
    K8: float = 0.0
    window: tuple[float, float] = (0.0, 0.0)
    provenance: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {k: float(getattr(self, k)) for k in BOUND_NAMES}
        out["window"] = [float(v) for v in self.window]
        out["provenance"] = dict(self.provenance)
        return out


def sample_bounds(traj, potential: PotentialSpec, nl: Nonlinearity,
                  curvature: CurvatureData | list[CurvatureData] | None = None) -> BoundSet:
    """Suprema of every bound-defining quantity over all snapshots and nodes.

    ``traj`` needs ``grid``, ``times`` and ``w`` (one array per snapshot).
    """
    if len(traj.times) == 0:
        raise ValueError("empty trajectory")
    grid = traj.grid
    sup = dict.fromkeys(("q", "gq", "hq", "G_w", "Gp", "hG_w", "gG_w"), 0.0)
    zero_f = np.zeros(grid.shape)
    for t, w in zip(traj.times, traj.w):
        if np.any(w <= 0):
            raise DomainError(f"non-positive w in trajectory at t={t}")
        q = potential.sample(grid, t)
        sf = source_fields(nl, grid, w, t, zero_f)
        vals = {
            "q": np.abs(q.value),
            "gq": np.sqrt(norm_sq(q.grad)),
            "hq": np.sqrt(sym_frobenius_sq(q.hess)),
            "G_w": np.abs(sf.G) / w,
            "Gp": np.abs(sf.G_prime),
            "hG_w": np.sqrt(sym_frobenius_sq(sf.hess_G)) / w,
            "gG_w": np.sqrt(norm_sq(sf.grad_G)) / w,
        }
        for k, v in vals.items():
            sup[k] = max(sup[k], float(np.max(v)))
    prov = dict.fromkeys(BOUND_NAMES, "sampled")
    theta2, theta3 = sup["G_w"], sup["Gp"]
    analytic = nl.analytic_bounds()
    if "theta2" in analytic:
        theta2, prov["theta2"], prov["K7"] = analytic["theta2"], "analytic", "analytic"
    if "theta3" in analytic:
        theta3, prov["theta3"] = analytic["theta3"], "analytic"
    if curvature is None:
        K1 = 0.0
        prov["K1"] = "assumed (no curvature data)"
    elif isinstance(curvature, CurvatureData):
        K1 = curvature.K1
    else:
        K1 = max(c.K1 for c in curvature)
    prov["K2"] = "flat torus: ∇Rm = 0"
    return BoundSet(
        theta1=sup["q"], theta2=theta2, theta3=theta3, theta4=sup["gq"],
        K1=K1, K2=0.0, K3=sup["gq"], K4=sup["hq"], K5=sup["hG_w"],
        K6=sup["q"], K7=theta2, K8=sup["gG_w"],
        window=(float(traj.times[0]), float(traj.times[-1])),
        provenance=prov,
    )
