"""Periodic grids on flat tori and the discrete operators built on them.

Fields are plain numpy arrays laid out on ``Grid.shape`` (``indexing='ij'``).
Vector fields stack their components on a leading axis of length ``d``;
symmetric tensor fields stack the ``d(d+1)/2`` independent components
(``xx`` for d=1, ``xx, xy, yy`` for d=2).  The thin ``ScalarField``,
``VectorField`` and ``SymTensorField`` wrappers carry the grid and a time
tag for the public API; the array-level helpers (``grad``, ``hess``,
``lap``...) are what the solver and the checkers use internally.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MIN_NODES = 8
CUTOFF_SAMPLES = 10_000


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class Grid:
    dim: int
    lengths: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dim}")
        if len(self.lengths) != self.dim or len(self.counts) != self.dim:
            raise ValueError("need one length and one node count per axis")
        if any(n < MIN_NODES for n in self.counts):
            raise ValueError(f"resolution too low: need at least {MIN_NODES} nodes per axis, got {self.counts}")
        if any(not (L > 0) for L in self.lengths):
            raise ValueError(f"period lengths must be positive, got {self.lengths}")

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / n for L, n in zip(self.lengths, self.counts))

    @property
    def h(self) -> float:
        """Largest spacing; used for tolerance scaling."""
        return max(self.spacing)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.counts)

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def ncomp(self) -> int:
        return self.dim * (self.dim + 1) // 2

    def axes(self) -> list[np.ndarray]:
        return [np.arange(n) * h for n, h in zip(self.counts, self.spacing)]

    def coords(self) -> list[np.ndarray]:
        """Node coordinates, one array of ``shape`` per axis."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def node_position(self, index) -> np.ndarray:
        index = np.atleast_1d(index)
        return np.array([i * h for i, h in zip(index, self.spacing)], dtype=float)

    def nearest_node(self, point) -> tuple[int, ...]:
        point = np.atleast_1d(np.asarray(point, dtype=float))
        return tuple(int(np.rint(p / h)) % n for p, h, n in zip(point, self.spacing, self.counts))

    def integrate(self, values: np.ndarray) -> float:
        """Uniform Riemann sum (node value times cell volume)."""
        return float(np.sum(values) * self.cell_volume)

    # -- array-level operators -------------------------------------------------

    def _d1(self, u: np.ndarray, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return (np.roll(u, -1, axis) - np.roll(u, 1, axis)) / (2.0 * h)

    def _d2(self, u: np.ndarray, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        return (np.roll(u, -1, axis) - 2.0 * u + np.roll(u, 1, axis)) / (h * h)

    def grad(self, u: np.ndarray) -> np.ndarray:
        return np.stack([self._d1(u, a) for a in range(self.dim)])

    def hess(self, u: np.ndarray) -> np.ndarray:
        if self.dim == 1:
            return self._d2(u, 0)[None]
        uxy = self._d1(self._d1(u, 1), 0)
        return np.stack([self._d2(u, 0), uxy, self._d2(u, 1)])

    def lap(self, u: np.ndarray) -> np.ndarray:
        out = self._d2(u, 0)
        for a in range(1, self.dim):
            out = out + self._d2(u, a)
        return out

    def lap_f(self, u: np.ndarray, f: np.ndarray, grad_f: np.ndarray | None = None) -> np.ndarray:
        if grad_f is None:
            grad_f = self.grad(f)
        return self.lap(u) - dot(grad_f, self.grad(u))


def dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pointwise inner product of two stacked vector fields."""
    out = a[0] * b[0]
    for i in range(1, a.shape[0]):
        out = out + a[i] * b[i]
    return out


def norm_sq(v: np.ndarray) -> np.ndarray:
    return dot(v, v)


def sym_quadratic(T: np.ndarray, v: np.ndarray) -> np.ndarray:
    """T(v, v) for a packed symmetric tensor field."""
    if T.shape[0] == 1:
        return T[0] * v[0] * v[0]
    return T[0] * v[0] * v[0] + 2.0 * T[1] * v[0] * v[1] + T[2] * v[1] * v[1]


def sym_frobenius_sq(T: np.ndarray) -> np.ndarray:
    if T.shape[0] == 1:
        return T[0] * T[0]
    return T[0] * T[0] + 2.0 * T[1] * T[1] + T[2] * T[2]


def sym_outer(v: np.ndarray) -> np.ndarray:
    if v.shape[0] == 1:
        return (v[0] * v[0])[None]
    return np.stack([v[0] * v[0], v[0] * v[1], v[1] * v[1]])


def sym_min_eig(T: np.ndarray) -> np.ndarray:
    """Closed-form smallest eigenvalue per node (d <= 2)."""
    if T.shape[0] == 1:
        return T[0]
    a, b, c = T
    return 0.5 * (a + c) - np.sqrt(0.25 * (a - c) ** 2 + b * b)


def sym_full(T: np.ndarray) -> np.ndarray:
    """Unpack to a (d, d, *shape) array."""
    if T.shape[0] == 1:
        return T[None]
    a, b, c = T
    return np.array([[a, b], [b, c]])


# -- public field types ---------------------------------------------------------


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    data: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if self.data.shape != self.grid.shape:
            raise GridMismatchError(f"scalar data shape {self.data.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("scalar field contains non-finite values")

    @classmethod
    def from_function(cls, grid: Grid, func, t: float = 0.0) -> "ScalarField":
        data = np.broadcast_to(np.asarray(func(*grid.coords()), dtype=float), grid.shape).copy()
        return cls(grid, data, t)


@dataclass(frozen=True)
class VectorField:
    grid: Grid
    data: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if self.data.shape != (self.grid.dim, *self.grid.shape):
            raise GridMismatchError(f"vector data shape {self.data.shape} does not match grid")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("vector field contains non-finite values")


@dataclass(frozen=True)
class SymTensorField:
    grid: Grid
    data: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        if self.data.shape != (self.grid.ncomp, *self.grid.shape):
            raise GridMismatchError(f"tensor data shape {self.data.shape} does not match grid")
        if not np.all(np.isfinite(self.data)):
            raise ValueError("tensor field contains non-finite values")

    def component(self, i: int, j: int) -> np.ndarray:
        return sym_full(self.data)[i][j]

    def frobenius(self) -> np.ndarray:
        return np.sqrt(sym_frobenius_sq(self.data))

    def min_eigenvalue(self) -> np.ndarray:
        return sym_min_eig(self.data)


@dataclass(frozen=True)
class CurvatureData:
    ricci_f: SymTensorField
    ricci_f_mn: SymTensorField
    K: float
    K1: float
    K2: float = 0.0
    variant: str = "infinity"
    m: float | None = None


@dataclass(frozen=True)
class Cutoff:
    phi: ScalarField
    center: tuple[float, ...]
    R: float
    C1: float
    C2: float
    distance: np.ndarray = field(repr=False, compare=False)


def make_torus_grid(d: int, lengths: Sequence[float], counts: Sequence[int]) -> Grid:
    return Grid(int(d), tuple(float(L) for L in lengths), tuple(int(n) for n in counts))


def _check_same(a, b):
    if a.grid != b.grid:
        raise GridMismatchError("fields live on different grids")
    if a.t != b.t:
        raise GridMismatchError(f"fields carry different time tags ({a.t} vs {b.t})")


def gradient(u: ScalarField) -> VectorField:
    return VectorField(u.grid, u.grid.grad(u.data), u.t)


def hessian(u: ScalarField) -> SymTensorField:
    return SymTensorField(u.grid, u.grid.hess(u.data), u.t)


def laplacian(u: ScalarField) -> ScalarField:
    return ScalarField(u.grid, u.grid.lap(u.data), u.t)


def weighted_laplacian(u: ScalarField, f: ScalarField) -> ScalarField:
    """L_f u = Δu - <∇f, ∇u>."""
    _check_same(u, f)
    return ScalarField(u.grid, u.grid.lap_f(u.data, f.data), u.t)


def tensor_lower_bound(T: SymTensorField | np.ndarray) -> float:
    """Smallest K >= 0 with T >= -K g at every node."""
    data = T.data if isinstance(T, SymTensorField) else np.asarray(T)
    worst = float(np.max(-sym_min_eig(data)))
    return max(0.0, worst)


def bakry_emery(f: ScalarField, m: float | None = None, variant: str = "infinity") -> CurvatureData:
    """Bakry-Émery Ricci tensors of a flat torus weighted by e^{-f}.

    On a flat torus Ric = 0, so Ric_f = Hess f and the finite version
    subtracts ∇f⊗∇f/(m-n).  ``K`` is the lower-bound constant of the
    requested variant; ``K1`` always refers to Ric_f (|Rm| = 0 here).
    ``m == n`` is accepted only for constant f, where the correction
    term vanishes identically.
    """
    grid = f.grid
    n = grid.dim
    hf = grid.hess(f.data)
    gf = grid.grad(f.data)
    if variant == "infinity":
        mn = hf.copy()
    elif variant == "finite":
        if m is None:
            raise ValueError("finite Bakry-Émery variant needs m")
        if m < n or (m == n and np.any(gf != 0.0)):
            raise ValueError(f"need m > n (m={m}, n={n}) unless f is constant")
        mn = hf if m == n else hf - sym_outer(gf) / (m - n)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    ric = SymTensorField(grid, hf, f.t)
    ric_mn = SymTensorField(grid, mn, f.t)
    K = tensor_lower_bound(ric_mn if variant == "finite" else ric)
    return CurvatureData(ric, ric_mn, K, tensor_lower_bound(ric), 0.0, variant, m)


def wrapped_delta(a, b, lengths) -> np.ndarray:
    """Minimal-image displacement b - a between two points on the torus."""
    L = np.asarray(lengths, dtype=float)
    diff = np.atleast_1d(np.asarray(b, dtype=float)) - np.atleast_1d(np.asarray(a, dtype=float))
    return diff - L * np.round(diff / L)


def geodesic_distance(a, b, grid: Grid) -> float:
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    total = 0.0
    for ai, bi, L in zip(a, b, grid.lengths):
        d = abs(ai - bi) % L
        d = min(d, L - d)
        total += d * d
    return float(np.sqrt(total))


def distance_field(p, grid: Grid) -> np.ndarray:
    """Geodesic distance from ``p`` to every node."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    total = np.zeros(grid.shape)
    for x, pi, L in zip(grid.coords(), p, grid.lengths):
        d = np.abs(x - pi) % L
        d = np.minimum(d, L - d)
        total += d * d
    return np.sqrt(total)


def cutoff_profile(r) -> np.ndarray:
    """ψ(r): 1 on [0,1], (1-s)^3 (1+3s) with s = r-1 on (1,2), 0 beyond."""
    r = np.asarray(r, dtype=float)
    s = np.clip(r - 1.0, 0.0, 1.0)
    return (1.0 - s) ** 3 * (1.0 + 3.0 * s)


def cutoff_profile_derivatives(r) -> tuple[np.ndarray, np.ndarray]:
    r = np.asarray(r, dtype=float)
    s = r - 1.0
    # closed interval: at s = 0 the blend's one-sided ψ'' = -12 is what bounds -ψ''
    inside = (s >= 0.0) & (s <= 1.0)
    d1 = np.where(inside, -12.0 * s * (1.0 - s) ** 2, 0.0)
    d2 = np.where(inside, -12.0 * (1.0 - s) * (1.0 - 3.0 * s), 0.0)
    return d1, d2


def cutoff_constants(samples: int = CUTOFF_SAMPLES) -> tuple[float, float]:
    """C1 = sup|ψ'/√ψ| and C2 = sup max(0, -ψ'') by dense sampling of [0, 2].

    ``samples`` counts intervals, so r = 1 (where -ψ'' peaks) is a node.
    """
    r = np.linspace(0.0, 2.0, samples + 1)
    psi = cutoff_profile(r)
    d1, d2 = cutoff_profile_derivatives(r)
    pos = psi > 0.0
    ratio = np.zeros_like(r)
    ratio[pos] = d1[pos] / np.sqrt(psi[pos])
    C2 = float(np.max(np.maximum(0.0, -d2)))
    return float(np.max(np.abs(ratio))), C2


def build_cutoff(p, R: float, grid: Grid, t: float = 0.0) -> Cutoff:
    if not 2.0 * R < min(grid.lengths) / 2.0:
        raise ValueError(f"2R = {2 * R} must be below half the shortest period ({min(grid.lengths) / 2})")
    if R <= 0:
        raise ValueError("cutoff radius must be positive")
    p = tuple(float(v) for v in np.atleast_1d(p))
    dist = distance_field(p, grid)
    phi = cutoff_profile(dist / R)
    C1, C2 = cutoff_constants()
    return Cutoff(ScalarField(grid, phi, t), p, float(R), C1, C2, dist)


def bochner_residual(u: ScalarField, f: ScalarField, variant: str = "identity",
                     m: float | None = None, K: float = 0.0) -> ScalarField:
    """Discrete residual of the weighted Bochner formula or of CD(K, m).

    ``identity``:   ½L_f|∇u|² - |Hess u|² - <∇L_f u, ∇u> - Ric_f(∇u, ∇u)
    ``inequality``: ½L_f|∇u|² - <∇u, ∇L_f u> - (L_f u)²/m - K|∇u|²
    """
    _check_same(u, f)
    g = u.grid
    gf = g.grad(f.data)
    gu = g.grad(u.data)
    gu2 = norm_sq(gu)
    lfu = g.lap_f(u.data, f.data, gf)
    half_lf_gu2 = 0.5 * g.lap_f(gu2, f.data, gf)
    cross = dot(g.grad(lfu), gu)
    if variant == "identity":
        hu = g.hess(u.data)
        res = half_lf_gu2 - sym_frobenius_sq(hu) - cross - sym_quadratic(g.hess(f.data), gu)
    elif variant == "inequality":
        if m is None or m <= 0:
            raise ValueError("inequality variant needs m > 0")
        res = half_lf_gu2 - cross - lfu * lfu / m - K * gu2
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return ScalarField(g, res, u.t)
