# # Smoothing of the Dirichlet semigroup
#
# Started from a single grid node, the semigroup spreads the mass so that
# its sup norm decays like t^{-N/(2s)} until the domain is felt.

import numpy as np

from fraclap import FracParams, GridFunction, Interval, assemble_dirichlet, grid_for_box
from fraclap import make_domain, ultracontractive_times, ultracontractivity_probe

grid = grid_for_box(1, -1.5, 1.5, 2.0 ** -8)
mask = make_domain(grid, Interval(-1.0, 1.0))
delta = GridFunction.from_callable(grid, lambda x: np.where(np.abs(x) < 0.5 * grid.h, 1.0, 0.0))

# In[1]:

for s in (0.25, 0.5, 0.75):
    op = assemble_dirichlet(mask, FracParams(s))
    fit = ultracontractivity_probe(op, delta, ultracontractive_times(op))
    print(f"s={s}: fitted slope {fit.slope:.3f}, predicted {-1 / (2 * s):.3f}")
