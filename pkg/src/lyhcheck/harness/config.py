"""INI scenario files.

Sections: [manifold] [weight] [potential] [nonlinearity] [initial] [solver]
[checks.<name>] [tolerances].  Keys are lowercase snake case, expressions
are quoted strings and lists are comma separated.  Parsing collects every
problem it finds before giving up, each tagged with a line number when the
offending key has one.
"""
from __future__ import annotations

import configparser
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..estimates import CHECK_NAMES, EstimateParams, Tolerance
from ..expr import Expr, ExpressionError
from ..geometry import Grid, make_torus_grid
from ..model import CATALOG, Nonlinearity, PotentialSpec, WeightSpec

# checks that run once per trajectory rather than once per snapshot
TRAJECTORY_CHECKS = ("harnack", "reversed_harnack", "liouville")

_PARAM_KEYS = {"m": "m", "alpha": "alpha", "eps": "eps", "beta": "beta", "delta": "delta", "c": "C",
               "radius": "R", "center": "center", "ceiling": "A", "t_min": "t_min"}
_OPTION_KEYS = {
    "harnack": {"pairs": int, "path_policy": str, "seed": int, "t_lo": float, "t_hi": float},
    "reversed_harnack": {"pairs": int, "seed": int, "t_lo": float, "t_hi": float},
    "liouville": {"threshold": float, "tail_fraction": float},
    "cd_condition": {"k": float},
}
_SECTION_KEYS = {
    "manifold": ("d", "lengths", "counts"),
    "weight": ("f",),
    "potential": ("q",),
    "initial": ("w0", "floor"),
    "solver": ("t_end", "safety", "dt", "snapshots", "snapshot_times", "seed", "t_min"),
    "tolerances": ("tau_abs", "tau_disc"),
}


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        super().__init__("\n".join(errors))
        self.errors = errors


@dataclass
class CheckConfig:
    name: str
    params: EstimateParams
    options: dict = field(default_factory=dict)


@dataclass
class Scenario:
    d: int
    lengths: tuple[float, ...]
    counts: tuple[int, ...]
    f: Expr
    q: Expr
    nl: Nonlinearity
    w0: Expr
    floor: float = 1e-8
    t_end: float = 1.0
    safety: float = 0.5
    dt: float | None = None
    snapshot_times: tuple[float, ...] = ()
    seed: int = 0
    t_min: float | None = None
    checks: list[CheckConfig] = field(default_factory=list)
    tolerance: Tolerance = field(default_factory=Tolerance)

    @property
    def grid(self) -> Grid:
        return make_torus_grid(self.d, self.lengths, self.counts)

    @property
    def weight(self) -> WeightSpec:
        return WeightSpec(self.f)

    @property
    def potential(self) -> PotentialSpec:
        return PotentialSpec(self.q)

    @property
    def check_t_min(self) -> float:
        return 0.05 * self.t_end if self.t_min is None else self.t_min

    def initial_data(self, grid: Grid | None = None) -> np.ndarray:
        grid = grid or self.grid
        return self.w0.on_grid(grid, 0.0)

    def normalized(self) -> dict:
        return {
            "manifold": {"d": self.d, "lengths": list(self.lengths), "counts": list(self.counts)},
            "weight": {"f": self.f.normalized()},
            "potential": {"q": self.q.normalized()},
            "nonlinearity": self.nl.describe(),
            "initial": {"w0": self.w0.normalized(), "floor": self.floor},
            "solver": {"t_end": self.t_end, "safety": self.safety, "dt": self.dt,
                       "snapshot_times": list(self.snapshot_times), "seed": self.seed, "t_min": self.check_t_min},
            "checks": [{"name": c.name, "params": c.params.echo(), "options": c.options} for c in self.checks],
            "tolerances": {"tau_abs": self.tolerance.tau_abs, "tau_disc": self.tolerance.tau_disc},
        }

    def digest(self) -> str:
        text = json.dumps(self.normalized(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def refined(self, level: int) -> "Scenario":
        """Copy with every count doubled ``level`` times (an explicit dt shrinks by 4 per level)."""
        from dataclasses import replace
        return replace(self, counts=tuple(n * 2 ** level for n in self.counts),
                       dt=None if self.dt is None else self.dt / 4 ** level)


def _line_map(text: str) -> dict[tuple[str, str], int]:
    """(section, key) -> 1-based line number, for error messages."""
    out, section = {}, None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
        elif section is not None:
            for sep in ("=", ":"):
                if sep in line:
                    out[(section, line.split(sep, 1)[0].strip().lower())] = no
                    break
    return out


class _Reader:
    def __init__(self, cp: configparser.ConfigParser, lines: dict):
        self.cp, self.lines, self.errors = cp, lines, []

    def where(self, section, key=None):
        no = self.lines.get((section, key)) if key else None
        loc = f"line {no}: " if no else ""
        return f"{loc}[{section}]" + (f" {key}" if key else "")

    def error(self, section, key, msg):
        self.errors.append(f"{self.where(section, key)}: {msg}")

    def raw(self, section, key, default=None):
        if not self.cp.has_option(section, key):
            return default
        return self.cp.get(section, key).strip().strip('"').strip("'")

    def typed(self, section, key, kind, default=None, required=False):
        text = self.raw(section, key)
        if text is None:
            if required:
                self.error(section, key, "missing required key")
            return default
        try:
            if kind is Expr:
                return Expr.parse(text)
            if kind is list:
                return [float(v) for v in text.replace(",", " ").split()]
            if kind is int:
                val = float(text)
                if not val.is_integer():
                    raise ValueError(f"expected an integer, got {text!r}")
                return int(val)
            if kind is float:
                val = float(text)
                if not math.isfinite(val):
                    raise ValueError(f"expected a finite number, got {text!r}")
                return val
            return text
        except (ValueError, ExpressionError) as exc:
            self.error(section, key, str(exc))
            return default

    def unknown_keys(self, section, allowed):
        for key in self.cp.options(section):
            if key not in allowed:
                self.error(section, key, f"unknown key (allowed: {', '.join(sorted(allowed))})")


def parse_config_text(text: str) -> Scenario:
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__")
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError([f"line {exc.lineno}: key outside any section"]) from None
    except configparser.ParsingError as exc:
        raise ConfigError([f"line {no}: cannot parse {line!r}" for no, line in exc.errors]) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError([f"line {exc.lineno}: {exc.message}"]) from None
    r = _Reader(cp, _line_map(text))

    for sec in cp.sections():
        if sec in _SECTION_KEYS:
            r.unknown_keys(sec, set(_SECTION_KEYS[sec]))
        elif sec.startswith("checks."):
            name = sec.split(".", 1)[1]
            if name not in CHECK_NAMES:
                r.error(sec, None, f"unknown check {name!r}; known: {', '.join(CHECK_NAMES)}")
            else:
                r.unknown_keys(sec, set(_PARAM_KEYS) | set(_OPTION_KEYS.get(name, {})))
        elif sec != "nonlinearity":
            r.error(sec, None, "unknown section")
    if not cp.has_section("manifold"):
        r.errors.append("missing section [manifold]")
    if not cp.has_section("solver"):
        r.errors.append("missing section [solver]")

    # manifold
    d = r.typed("manifold", "d", int, required=True) if cp.has_section("manifold") else None
    lengths = r.typed("manifold", "lengths", list, required=True) if cp.has_section("manifold") else None
    counts = r.typed("manifold", "counts", list, required=True) if cp.has_section("manifold") else None
    grid = None
    if d is not None and lengths is not None and counts is not None:
        try:
            if any(not float(c).is_integer() for c in counts):
                raise ValueError("counts must be integers")
            grid = make_torus_grid(d, lengths, counts)
        except ValueError as exc:
            r.error("manifold", None, str(exc))

    f = r.typed("weight", "f", Expr, Expr.parse("0")) if cp.has_section("weight") else Expr.parse("0")
    q = r.typed("potential", "q", Expr, Expr.parse("0")) if cp.has_section("potential") else Expr.parse("0")
    nl = _parse_nonlinearity(r)
    w0 = r.typed("initial", "w0", Expr, required=True) if cp.has_section("initial") else None
    if w0 is None and not cp.has_section("initial"):
        r.errors.append("missing section [initial]")
    floor = r.typed("initial", "floor", float, 1e-8) if cp.has_section("initial") else 1e-8
    if not floor > 0:
        r.error("initial", "floor", f"floor > 0 required (floor = {floor})")

    solver = {}
    if cp.has_section("solver"):
        solver["t_end"] = r.typed("solver", "t_end", float, required=True)
        solver["safety"] = r.typed("solver", "safety", float, 0.5)
        solver["dt"] = r.typed("solver", "dt", float)
        solver["seed"] = r.typed("solver", "seed", int, 0)
        solver["t_min"] = r.typed("solver", "t_min", float)
        nsnap = r.typed("solver", "snapshots", int)
        times = r.typed("solver", "snapshot_times", list)
        t_end = solver["t_end"]
        if t_end is not None and not t_end > 0:
            r.error("solver", "t_end", f"t_end > 0 required (t_end = {t_end})")
        elif t_end is not None:
            if times is not None:
                if any(not 0 <= t <= t_end for t in times):
                    r.error("solver", "snapshot_times", f"snapshot times must lie in [0, {t_end}]")
                solver["snapshot_times"] = tuple(sorted(set(times) | {t_end}))
            else:
                nsnap = nsnap if nsnap is not None else 21
                if nsnap < 2:
                    r.error("solver", "snapshots", f"snapshots ≥ 2 required (snapshots = {nsnap})")
                    nsnap = 2
                solver["snapshot_times"] = tuple(float(t) for t in np.linspace(0.0, t_end, nsnap))
        if solver["safety"] is not None and not 0 < solver["safety"] <= 1:
            r.error("solver", "safety", f"0 < safety ≤ 1 required (safety = {solver['safety']})")
        if solver["dt"] is not None and not solver["dt"] > 0:
            r.error("solver", "dt", f"dt > 0 required (dt = {solver['dt']})")

    tol = Tolerance()
    if cp.has_section("tolerances"):
        tol = Tolerance(r.typed("tolerances", "tau_abs", float, 1e-9), r.typed("tolerances", "tau_disc", float, 10.0))
        if not (tol.tau_abs >= 0 and tol.tau_disc >= 0):
            r.error("tolerances", None, "tolerances must be non-negative")

    w_init = None
    if grid is not None and w0 is not None:
        try:
            w_init = w0.on_grid(grid)
            if f is not None:
                f.on_grid(grid)
            if q is not None:
                q.on_grid(grid)
            if not np.min(w_init) >= floor:
                r.error("initial", "w0", f"min w0 ≥ floor = {floor:.3g} required (min w0 = {np.min(w_init):.3g})")
            elif nl is not None:
                nl.check_domain(w_init)
        except (ValueError, ExpressionError) as exc:
            r.error("initial", "w0", str(exc))

    checks = []
    for sec in cp.sections():
        if not sec.startswith("checks."):
            continue
        name = sec.split(".", 1)[1]
        if name not in CHECK_NAMES:
            continue
        checks.append(_parse_check(r, sec, name, grid, w_init))

    if r.errors:
        raise ConfigError(r.errors)
    return Scenario(
        d=grid.dim, lengths=grid.lengths, counts=grid.counts, f=f, q=q, nl=nl, w0=w0, floor=floor,
        t_end=solver["t_end"], safety=solver["safety"], dt=solver["dt"],
        snapshot_times=solver["snapshot_times"], seed=solver["seed"], t_min=solver["t_min"],
        checks=checks, tolerance=tol,
    )


def _parse_nonlinearity(r: _Reader) -> Nonlinearity | None:
    sec = "nonlinearity"
    if not r.cp.has_section(sec):
        return Nonlinearity()
    case = r.raw(sec, "case", "zero")
    if case not in CATALOG:
        r.error(sec, "case", f"unknown case {case!r}; known: {', '.join(CATALOG)}")
        return None
    required, _ = CATALOG[case]
    r.unknown_keys(sec, {"case", *(k.lower() for k in required)})
    params = {}
    for key in required:
        if case == "caffarelli_lin":
            params[key] = r.typed(sec, key.lower(), Expr, required=True)
        elif case == "custom_table":
            params[key] = r.typed(sec, key, list, required=True)
        else:
            params[key] = r.typed(sec, key, float, required=True)
    if any(v is None for v in params.values()):
        return None
    try:
        return Nonlinearity(case, params)
    except ValueError as exc:
        r.error(sec, None, str(exc))
        return None


def _parse_check(r: _Reader, sec: str, name: str, grid, w_init) -> CheckConfig:
    kw = {}
    for key, attr in _PARAM_KEYS.items():
        if key == "center":
            val = r.typed(sec, key, list)
            if val is not None:
                kw[attr] = tuple(val)
        else:
            val = r.typed(sec, key, float)
            if val is not None:
                kw[attr] = val
    params = EstimateParams(**kw)
    options = {}
    for key, kind in _OPTION_KEYS.get(name, {}).items():
        val = r.typed(sec, key, kind)
        if val is not None:
            options[key] = val
    if grid is not None:
        for v in params.violations(name, grid.dim):
            r.error(sec, None, v)
        if params.center is not None and len(params.center) != grid.dim:
            r.error(sec, "center", f"center needs {grid.dim} coordinates")
        if name == "li_yau_local" and params.R is not None and not 2 * params.R < min(grid.lengths) / 2:
            r.error(sec, "radius", f"2R < min(L)/2 = {min(grid.lengths) / 2:.6g} required (R = {params.R})")
        if name == "hessian_local" and params.R is not None and not params.R < min(grid.lengths) / 2:
            r.error(sec, "radius", f"R < min(L)/2 = {min(grid.lengths) / 2:.6g} required (R = {params.R})")
    if params.A is not None and w_init is not None and np.max(w_init) > params.A / math.e:
        r.error(sec, "ceiling", f"A ≥ e·sup w required (A = {params.A}, e·sup w0 = {math.e * np.max(w_init):.6g})")
    policy = options.get("path_policy")
    if policy is not None and policy not in ("straight", "sampled"):
        r.error(sec, "path_policy", f"path_policy must be straight or sampled (got {policy!r})")
    if options.get("pairs", 1) < 1:
        r.error(sec, "pairs", "pairs ≥ 1 required")
    return CheckConfig(name, params, options)


def parse_config(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read {path}: {exc.strerror}"]) from None
    return parse_config_text(text)
