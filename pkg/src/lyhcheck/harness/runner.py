"""Scenario execution, refinement studies and the solver/stencil benchmarks."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .. import estimates as est
from ..geometry import ScalarField, bochner_residual, build_cutoff, make_torus_grid
from ..model import DomainError, Nonlinearity
from ..solver import Equation, SolverError, SolverState, evolve
from .config import TRAJECTORY_CHECKS, CheckConfig, Scenario

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ROUNDOFF = 1e-13
MAX_NODES = 2 ** 22


@dataclass
class ReportBundle:
    scenario_hash: str
    scenario: dict
    run: dict = field(default_factory=dict)
    checks: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    abort: dict | None = None
    convergence: dict | None = None
    timing: dict = field(default_factory=dict)

    @property
    def verdicts(self) -> list[str]:
        return [c.verdict for c in self.checks]

    @property
    def exit_code(self) -> int:
        if self.abort is not None or self.errors:
            return 2
        return 1 if est.FAIL in self.verdicts else 0

    def to_dict(self, timing: bool = False) -> dict:
        out = {
            "schema_version": SCHEMA_VERSION,
            "scenario": {"hash": self.scenario_hash, "config": self.scenario},
            "run": self.run,
            "checks": [c.to_dict() for c in self.checks],
            "errors": self.errors,
            "abort": self.abort,
            "convergence": self.convergence,
        }
        if timing:
            out["timing"] = self.timing
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ReportBundle":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema version {d.get('schema_version')!r}")
        return cls(d["scenario"]["hash"], d["scenario"]["config"], d["run"],
                   [est.CheckReport.from_dict(c) for c in d["checks"]], d["errors"], d["abort"],
                   d["convergence"], d.get("timing", {}))


def build_equation(sc: Scenario, grid=None) -> Equation:
    return Equation(grid or sc.grid, sc.weight, sc.potential, sc.nl)


def simulate(sc: Scenario, grid=None):
    grid = grid or sc.grid
    eq = build_equation(sc, grid)
    w0 = sc.initial_data(grid)
    traj = evolve(eq, SolverState(w0, 0.0), sc.t_end, output_times=sc.snapshot_times,
                  dt=sc.dt, safety=sc.safety)
    return eq, traj


def _pair_times(window, t_lo, t_hi, rng, cadence: int | None):
    """Random (t1, t2) from snapshot times in [t_lo, t_hi] with t2 - t1 ≥ cadence·(largest gap)."""
    times = np.array([s.t for s in window])
    gap = float(np.max(np.diff(times))) if len(times) > 1 else math.inf
    idx = np.flatnonzero((times >= t_lo - 1e-12) & (times <= t_hi + 1e-12))
    need = (cadence or 0) * gap
    choices = [(i, j) for i in idx for j in idx if j > i and times[j] - times[i] >= need - 1e-12]
    if not choices:
        raise ValueError(f"no snapshot pairs in [{t_lo}, {t_hi}] are {need:.3g} apart; store more snapshots")
    i, j = choices[int(rng.integers(len(choices)))]
    return times[i], times[j]


def _random_point(grid, rng):
    return [float(rng.uniform(0.0, L)) for L in grid.lengths]


def run_checks(sc: Scenario, eq: Equation, sn: list, checks: list[CheckConfig] | None = None):
    """Run every configured check; returns (reports, errors)."""
    grid = eq.grid
    bounds = est.window_bounds(sn)
    tol = sc.tolerance
    reports, errors = [], []
    for cc in checks if checks is not None else sc.checks:
        p, opt = cc.params, cc.options
        t_min = p.t_min if p.t_min is not None else sc.check_t_min
        p = replace(p, t_min=t_min)
        active = [s for s in sn if s.t >= t_min and s.t > 0]
        try:
            if cc.name in TRAJECTORY_CHECKS:
                reports.extend(_trajectory_check(cc.name, p, opt, sn, bounds, grid, tol, t_min, sc))
                continue
            cutoff = None
            if cc.name == "li_yau_local":
                center = p.center or tuple(L / 2 for L in grid.lengths)
                cutoff = build_cutoff(center, p.R, grid)
            if cc.name == "hessian_local" and p.center is None:
                p = replace(p, center=tuple(L / 2 for L in grid.lengths))
            for s in active:
                reports.append(_snapshot_check(cc.name, p, opt, s, sn, bounds, cutoff, tol))
        except (ValueError, FloatingPointError, DomainError) as exc:
            errors.append({"check": cc.name, "message": str(exc)})
    return reports, errors


def _snapshot_check(name, p, opt, s, sn, bounds, cutoff, tol):
    if name == "li_yau_compact":
        return est.li_yau_compact(s, p.m, window=sn, tol=tol)
    if name == "li_yau_global":
        return est.li_yau_global(s, p, window=sn, tol=tol)
    if name == "li_yau_local":
        return est.li_yau_local(s, p, cutoff, window=sn, tol=tol)
    if name == "hamilton":
        return est.hamilton_bound(s, bounds, A=p.A, window=sn, tol=tol)
    if name == "hessian_global":
        return est.hessian_global(s, p, bounds, tol=tol)
    if name == "hessian_local":
        return est.hessian_local(s, p, bounds, tol=tol)
    if name == "ly_hessian":
        return est.ly_hessian(s, p, bounds, window=sn, tol=tol)
    if name == "hamilton_hessian":
        return est.hamilton_hessian(s, p, bounds, window=sn, tol=tol)
    if name == "cd_condition":
        K = opt.get("k", -est.window_K(sn, p.m))
        u = ScalarField(s.grid, np.log(s.w), s.t)
        return est.cd_condition(u, s.f_field(), p.m, K, tol=tol)
    raise ValueError(f"unknown check {name!r}")


def _trajectory_check(name, p, opt, sn, bounds, grid, tol, t_min, sc):
    if name == "liouville":
        return [est.liouville_assess(sn, opt.get("threshold", 1e-8), opt.get("tail_fraction", 0.5), tol=tol)]
    rng = np.random.default_rng(opt.get("seed", sc.seed))
    t_lo, t_hi = opt.get("t_lo", t_min), opt.get("t_hi", sc.t_end)
    out = []
    for _ in range(opt.get("pairs", 10)):
        if name == "harnack":
            t1, t2 = _pair_times(sn, t_lo, t_hi, rng, 16)
            x1, x2 = _random_point(grid, rng), _random_point(grid, rng)
            out.append(est.harnack_bound(sn, (x1, t1), (x2, t2), p, opt.get("path_policy", "straight"),
                                         seed=int(rng.integers(2 ** 31)), tol=tol))
        else:
            t1, t2 = _pair_times(sn, t_lo, t_hi, rng, None)
            out.append(est.reversed_harnack(sn, _random_point(grid, rng), t1, t2, p, bounds, tol=tol))
    return out


def run_scenario(sc: Scenario) -> ReportBundle:
    return _run(sc)[0]


def _run(sc: Scenario):
    start = time.perf_counter()
    bundle = ReportBundle(sc.digest(), sc.normalized())
    try:
        eq, traj = simulate(sc)
    except (SolverError, DomainError) as exc:
        summary = exc.summary() if hasattr(exc, "summary") else {"reason": "domain", "message": str(exc)}
        bundle.abort = summary
        bundle.timing = {"wall_s": time.perf_counter() - start}
        log.warning("solver aborted: %s", exc)
        return bundle, None
    bundle.run = {"dt": traj.meta["dt"], "steps": traj.meta["steps"], "snapshots": list(traj.times),
                  "min_w": traj.meta["min_w"], "steady_norm": traj.meta["steady_norm"]}
    sn = est.snapshots(eq, traj)
    bundle.run["bounds"] = est.window_bounds(sn).as_dict()
    bundle.checks, bundle.errors = run_checks(sc, eq, sn)
    bundle.timing = {"wall_s": time.perf_counter() - start}
    return bundle, traj


# -- refinement ------------------------------------------------------------------


def empirical_orders(errors, scale: float = 1.0):
    """log2(e_k / e_{k+1}); "n/a" where either error sits at roundoff."""
    out = []
    for a, b in zip(errors[:-1], errors[1:]):
        if a <= ROUNDOFF * scale or b <= ROUNDOFF * scale:
            out.append("n/a")
        else:
            out.append(math.log2(a / b))
    return out


def error_ratios(errors):
    return [a / b if b > 0 else math.inf for a, b in zip(errors[:-1], errors[1:])]


def refinement_study(sc: Scenario, levels: int = 2) -> ReportBundle:
    """Rerun on grids refined ``levels - 1`` times; tabulate margins and self-convergence."""
    if levels < 2:
        raise ValueError("levels ≥ 2 required")
    finest = int(np.prod(sc.counts)) * 2 ** (sc.d * (levels - 1))
    if finest > MAX_NODES:
        raise ValueError(f"finest grid has {finest} nodes, above the budget of {MAX_NODES}")
    start = time.perf_counter()
    runs = [_run(sc.refined(k)) for k in range(levels)]
    bundles = [b for b, _ in runs]
    base = bundles[0]
    base.convergence = {"levels": [list(b.scenario["manifold"]["counts"]) for b in bundles]}
    for b in bundles:
        if b.abort is not None:
            base.abort = b.abort
            return base
        base.errors.extend(b.errors)
    table = {}
    for k, b in enumerate(bundles):
        for rep in b.checks:
            row = table.setdefault(rep.name, [math.inf] * levels)
            row[k] = min(row[k], rep.min_margin)
    shrink = {}
    for name, margins in table.items():
        ok = all(not (a < 0) or (b >= 0 or abs(a) >= 2 * abs(b)) for a, b in zip(margins[:-1], margins[1:]))
        shrink[name] = ok
    base.convergence["min_margin"] = table
    base.convergence["negative_margins_shrink"] = shrink
    # self-convergence of the final state, coarse nodes read off the finer grid
    finals = [traj.w[-1] for _, traj in runs]
    diffs = []
    for k in range(levels - 1):
        fine = finals[k + 1][tuple(slice(None, None, 2) for _ in range(sc.d))]
        diffs.append(float(np.max(np.abs(finals[k] - fine))))
    scale = float(np.max(np.abs(finals[-1])))
    base.convergence["w_final_self"] = {"errors": diffs, "orders": empirical_orders(diffs, scale)}
    base.timing = {"wall_s": time.perf_counter() - start}
    return base


# -- benchmarks -------------------------------------------------------------------


def bochner_study(n0: int = 256, levels: int = 3) -> dict:
    """sup |Bochner identity residual| for u = sin x, f = cos x on a 2π circle."""
    errs = []
    for k in range(levels):
        g = make_torus_grid(1, [2 * math.pi], [n0 * 2 ** k])
        x = g.coords()[0]
        res = bochner_residual(ScalarField(g, np.sin(x)), ScalarField(g, np.cos(x)))
        errs.append(float(np.max(np.abs(res.data))))
    return {"n": [n0 * 2 ** k for k in range(levels)], "errors": errs, "orders": empirical_orders(errs)}


def logistic_value(dt: float, c: float = 1.0, t_end: float = 1.0) -> float:
    """RK4 value of the spatially uniform Fisher-KPP solution started at ½."""
    g = make_torus_grid(1, [2 * math.pi], [8])
    eq = Equation(g, nl=Nonlinearity("fisher_kpp", {"c": c}))
    traj = evolve(eq, SolverState(np.full(g.shape, 0.5)), t_end, dt=dt)
    return float(traj.w[-1][0])


def logistic_exact(t: float, c: float = 1.0) -> float:
    return 1.0 / (1.0 + math.exp(c * t))


def logistic_dt_study(dts=(0.2, 0.1, 0.05)) -> dict:
    errs = [abs(logistic_value(dt) - logistic_exact(1.0)) for dt in dts]
    return {"dt": list(dts), "errors": errs, "ratios": error_ratios(errs), "orders": empirical_orders(errs)}


def fourier_decay_error(n: int, t_end: float = 1.0) -> float:
    """Relative max error of pure heat from 2 + sin x against 2 + e^{-t} sin x."""
    g = make_torus_grid(1, [2 * math.pi], [n])
    x = g.coords()[0]
    traj = evolve(Equation(g), SolverState(2.0 + np.sin(x)), t_end)
    exact = 2.0 + math.exp(-t_end) * np.sin(x)
    return float(np.max(np.abs(traj.w[-1] - exact)) / np.max(np.abs(exact)))


def fourier_decay_study(ns=(32, 64, 128, 256)) -> dict:
    errs = [fourier_decay_error(n) for n in ns]
    return {"n": list(ns), "errors": errs, "ratios": error_ratios(errs), "orders": empirical_orders(errs)}
