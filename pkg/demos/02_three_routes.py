# # Three ways to apply the operator
#
# The singular integral, the heat-semigroup time integral and the Fourier
# multiplier all define the same operator.  On a smooth bump their discrete
# versions agree to far better than the discretization error of any of them.

import numpy as np

from fraclap import FracParams, GridFunction, apply_fl_integral, apply_fl_multiplier
from fraclap import apply_fl_semigroup, grid_for_box


def bump(x):
    out = np.zeros_like(x)
    m = np.abs(x) < 1
    out[m] = np.exp(-1 / (1 - x[m] ** 2))
    return out


grid = grid_for_box(1, -2.0, 2.0, 2.0 ** -9)
u = GridFunction.from_callable(grid, bump)
inner = ~grid.boundary_nodes()

# In[1]:

print(f"{'s':>5} {'multiplier vs integral':>24} {'semigroup vs integral':>24}")
for s in (0.25, 0.5, 0.75):
    a = apply_fl_integral(u, FracParams(s)).values[inner]
    b = apply_fl_semigroup(u, FracParams(s)).values[inner]
    c = apply_fl_multiplier(u, s).values[inner]
    rel = lambda v: np.linalg.norm(v - a) / np.linalg.norm(a)
    print(f"{s:5.2f} {rel(c):24.2e} {rel(b):24.2e}")

# Far from the bump the operator decays like |x|^{-1-2s} and is negative.

# In[2]:

Lu = apply_fl_integral(u, FracParams(0.5))
for x in (1.2, 1.5, 1.9):
    i = int(round((x - grid.origin[0]) / grid.h))
    print(f"x={x}: (-Delta)^(1/2) u = {Lu.values[i]: .4e}")
