"""Explicit RK4 time stepping of ∂t w = L_f w - q w - G(w) on a periodic grid."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .geometry import Grid
from .model import DomainError, Nonlinearity, PotentialSpec, WeightSpec, source_value

log = logging.getLogger(__name__)

POSITIVITY_FLOOR = 1e-8


class SolverError(RuntimeError):
    pass


class PositivityError(SolverError):
    def __init__(self, message: str, t: float, location, value: float):
        super().__init__(message)
        self.t = t
        self.location = location
        self.value = value

    def summary(self) -> dict:
        return {"reason": "positivity", "message": str(self), "t": self.t,
                "location": list(self.location), "value": self.value}


@dataclass(frozen=True)
class Equation:
    grid: Grid
    weight: WeightSpec = field(default_factory=WeightSpec)
    potential: PotentialSpec = field(default_factory=PotentialSpec)
    nl: Nonlinearity = field(default_factory=Nonlinearity)

    def rhs(self, w: np.ndarray, t: float) -> np.ndarray:
        if not np.all(w > 0):
            idx = tuple(int(i) for i in np.unravel_index(np.argmin(w), w.shape))
            raise PositivityError(f"w <= 0 at node {idx} (t={t:.6g})", t,
                                  self.grid.node_position(idx).tolist(), float(w[idx]))
        g = self.grid
        fs = self.weight.sample(g, t)
        q = self.potential.value(g, t)
        out = g.lap(w)
        if not self.weight.is_constant:
            out -= sum(fs.grad[a] * g._d1(w, a) for a in range(g.dim))
        if not self.potential.is_constant or np.any(q != 0):
            out -= q * w
        if not self.nl.is_zero:
            out -= source_value(self.nl, g, w, t)
        return out


@dataclass
class SolverState:
    w: np.ndarray
    t: float = 0.0
    step: int = 0


@dataclass
class Trajectory:
    grid: Grid
    times: list[float] = field(default_factory=list)
    w: list[np.ndarray] = field(default_factory=list)
    w_t: list[np.ndarray] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def append(self, t: float, w: np.ndarray, w_t: np.ndarray) -> None:
        if self.times and not t > self.times[-1]:
            raise ValueError("snapshot times must be strictly increasing")
        self.times.append(float(t))
        self.w.append(w.copy())
        self.w_t.append(w_t)

    def index_of(self, t: float) -> int:
        return int(np.argmin(np.abs(np.asarray(self.times) - t)))

    def __len__(self) -> int:
        return len(self.times)


def rhs(state: SolverState, weight: WeightSpec, potential: PotentialSpec, nl: Nonlinearity,
        grid: Grid) -> np.ndarray:
    return Equation(grid, weight, potential, nl).rhs(state.w, state.t)


def stable_dt(grid: Grid, weight: WeightSpec, potential: PotentialSpec, nl: Nonlinearity,
              safety: float = 0.5, w_range: tuple[float, float] | None = None,
              times=(0.0,)) -> float:
    """Explicit-diffusion step bound with a reaction clamp.

    dt = safety * min(h²/(2d(1 + sup|∇f| h)), 1/(1 + sup|q| + sup|G'|)).
    sup|G'| is sampled on ``w_range`` (defaults to (0, 1) only for the
    cases defined there, otherwise it is ignored unless given).
    """
    if not 0 < safety <= 1:
        raise ValueError("safety must lie in (0, 1]")
    h = grid.h
    gf = max(float(np.max(np.sqrt(np.sum(weight.sample(grid, t).grad ** 2, axis=0)))) for t in times)
    sq = max(float(np.max(np.abs(potential.value(grid, t)))) for t in times)
    sgp = 0.0
    if not nl.is_zero and nl.case != "caffarelli_lin":
        if w_range is None and nl.case in ("fisher_kpp", "allen_cahn"):
            w_range = (1e-6, 1 - 1e-6)
        if w_range is not None:
            ws = np.linspace(w_range[0], w_range[1], 257)
            sgp = float(np.max(np.abs(nl.g_prime(ws))))
    diff = h * h / (2 * grid.dim * (1.0 + gf * h))
    react = 1.0 / (1.0 + sq + sgp)
    return safety * min(diff, react)


def step_rk4(eq: Equation, state: SolverState, dt: float) -> SolverState:
    w, t = state.w, state.t
    with np.errstate(over="ignore", invalid="ignore"):  # caught by the finiteness check below
        k1 = eq.rhs(w, t)
        k2 = eq.rhs(w + 0.5 * dt * k1, t + 0.5 * dt)
        k3 = eq.rhs(w + 0.5 * dt * k2, t + 0.5 * dt)
        k4 = eq.rhs(w + dt * k3, t + dt)
        w_new = w + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    t_new = t + dt
    if not np.all(np.isfinite(w_new)):
        raise SolverError(f"non-finite values after step at t={t_new:.6g}")
    if not np.all(w_new > 0):
        idx = tuple(int(i) for i in np.unravel_index(np.argmin(w_new), w_new.shape))
        raise PositivityError(f"positivity lost at node {idx}, t={t_new:.6g}: w={w_new[idx]:.3g}", t_new,
                              eq.grid.node_position(idx).tolist(), float(w_new[idx]))
    return SolverState(w_new, t_new, state.step + 1)


def steady_state_norm(eq: Equation, state: SolverState) -> float:
    return float(np.max(np.abs(eq.rhs(state.w, state.t))))


def evolve(eq: Equation, state: SolverState, t_end: float, output_times=None,
           dt: float | None = None, safety: float = 0.5) -> Trajectory:
    """Integrate to ``t_end`` storing snapshots at ``output_times``.

    Steps are shortened to land exactly on every output time.  The initial
    state is stored too when its time is among the outputs (or none are given).
    """
    if not t_end > state.t:
        raise ValueError("t_end must exceed the start time")
    if dt is None:
        w0 = state.w
        dt = stable_dt(eq.grid, eq.weight, eq.potential, eq.nl, safety,
                       w_range=None if eq.nl.case in ("fisher_kpp", "allen_cahn") else (float(w0.min()), float(w0.max())),
                       times=(state.t, t_end))
    if output_times is None:
        output_times = [state.t, t_end]
    outs = sorted({float(t) for t in output_times if state.t <= t <= t_end})
    if not outs or outs[-1] != t_end:
        outs.append(float(t_end))
    traj = Trajectory(eq.grid)
    traj.meta.update(dt=float(dt), steps=0, min_w=[], steady_norm=[])
    cur = SolverState(np.array(state.w, dtype=float), float(state.t), state.step)

    def record(s: SolverState):
        wt = eq.rhs(s.w, s.t)
        traj.append(s.t, s.w, wt)
        traj.meta["min_w"].append(float(s.w.min()))
        traj.meta["steady_norm"].append(float(np.max(np.abs(wt))))

    if outs[0] == cur.t:
        record(cur)
        outs = outs[1:]
    eps = 1e-12 * max(1.0, abs(t_end))
    for target in outs:
        while target - cur.t > eps:
            h = min(dt, target - cur.t)
            cur = step_rk4(eq, cur, h)
        cur = SolverState(cur.w, target, cur.step)
        record(cur)
    traj.meta["steps"] = cur.step - state.step
    log.debug("evolved %d steps with dt=%.3g", traj.meta["steps"], dt)
    return traj


__all__ = [
    "DomainError", "Equation", "PositivityError", "SolverError", "SolverState", "Trajectory",
    "evolve", "rhs", "stable_dt", "step_rk4", "steady_state_norm",
]
