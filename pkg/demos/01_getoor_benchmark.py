# # The Getoor benchmark
#
# On the unit interval the Dirichlet problem (-Delta)^{1/2} u = 1 has the
# exact solution sqrt(1 - x^2).  We solve it on a ladder of grids and watch
# the error in the middle half of the interval shrink.

import numpy as np

from fraclap import FracParams, GridFunction, Interval, assemble_dirichlet, grid_for_box
from fraclap import make_domain, solve_dirichlet

# In[1]:

print(f"{'h':>10} {'nodes':>6} {'rel. L2 error on (-1/2,1/2)':>30}")
for k in range(6, 11):
    h = 2.0 ** -k
    grid = grid_for_box(1, -1.5, 1.5, h)
    mask = make_domain(grid, Interval(-1.0, 1.0))
    op = assemble_dirichlet(mask, FracParams(0.5))
    u = solve_dirichlet(op, GridFunction.from_callable(grid, np.ones_like))
    x = grid.axis(0)
    exact = np.sqrt(np.clip(1 - x * x, 0, None))
    mid = np.abs(x) < 0.5
    err = np.linalg.norm(u.values[mid] - exact[mid]) / np.linalg.norm(exact[mid])
    print(f"{h:10.2e} {len(op.index_map):6d} {err:30.3e}")

# The same check for other orders uses the constant c_{1,s} of the profile
# (1 - x^2)_+^s; the solver does not know about it, the error still decays.

# In[2]:

from math import gamma

for s in (0.25, 0.75):
    c = gamma(0.5) / (4 ** s * gamma(1 + s) * gamma(0.5 + s))
    grid = grid_for_box(1, -1.5, 1.5, 2.0 ** -9)
    mask = make_domain(grid, Interval(-1.0, 1.0))
    u = solve_dirichlet(assemble_dirichlet(mask, FracParams(s)), GridFunction.from_callable(grid, np.ones_like))
    x = grid.axis(0)
    exact = c * np.clip(1 - x * x, 0, None) ** s
    mid = np.abs(x) < 0.5
    print(f"s={s}: rel. error {np.linalg.norm(u.values[mid] - exact[mid]) / np.linalg.norm(exact[mid]):.2e}")
