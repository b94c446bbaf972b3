"""Which time prefactor belongs in the Harnack inequality?

Integrating the Li-Yau bound along a path gives the factor (t2/t1)^{mα/(2(1-ε))}.
With the reciprocal factor, a constant solution already violates the
inequality.  Both bounds are computed side by side.
"""
import numpy as np

from lyhcheck.estimates import EstimateParams, Snapshot, harnack_bound
from lyhcheck.geometry import make_torus_grid
from lyhcheck.solver import Equation

grid = make_torus_grid(1, [2 * np.pi], [32])
eq = Equation(grid)
params = EstimateParams(m=2, alpha=2, eps=0.5)

for t1, t2 in ((0.1, 0.2), (0.1, 0.5), (0.5, 2.0)):
    window = [Snapshot(eq, t, np.full(32, 3.0)) for t in np.linspace(t1, t2, 33)]
    rep = harnack_bound(window, ((1.0,), t1), ((1.0,), t2), params)
    i = rep.intermediates
    print(f"(t1, t2) = ({t1}, {t2}):  ratio {i['ratio']:.3f}  "
          f"bound {i['bound']:10.4f}  reciprocal-prefactor bound {i['bound_with_t1_over_t2_prefactor']:.4f}")
