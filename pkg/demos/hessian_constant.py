"""The Hessian estimates carry a free constant C.  How large must it be?

For an Allen-Cahn run we sweep β along the admissible window (δ = ½ needs
β ≥ 1) and report the smallest C that keeps every margin non-negative on a
rough initial profile.  The values grow with β, because the C-dependent
pieces of the bound shrink like 1/β.
"""
import math

import numpy as np

from lyhcheck.estimates import EstimateParams, Snapshot, hessian_global, window_bounds
from lyhcheck.geometry import make_torus_grid
from lyhcheck.model import Nonlinearity
from lyhcheck.solver import Equation

grid = make_torus_grid(1, [2 * math.pi], [128])
x = grid.coords()[0]
eq = Equation(grid, nl=Nonlinearity("allen_cahn", {"c": 1.0}))
rough = 0.5 + 0.25 * np.sin(3 * x) + 0.15 * np.cos(7 * x)
window = [Snapshot(eq, t, rough) for t in (0.0, 1.0)]
bounds = window_bounds(window)

print(f"{'beta':>6s} {'required C':>12s} {'margin at C=1':>14s}")
for beta in (1.0, 1.5, 2.0, 4.0, 8.0):
    rep = hessian_global(window[-1], EstimateParams(beta=beta, delta=0.5, C=1.0), bounds)
    print(f"{beta:6.2f} {rep.intermediates['required_C']:12.5f} {rep.min_margin:14.5f}")
