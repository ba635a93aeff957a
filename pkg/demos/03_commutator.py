# # Localizing with a cutoff: the commutator
#
# Multiplying a solution by a cutoff eta produces the commutator
# g = (-Delta)^s(eta u) - eta (-Delta)^s u.  We compute it by the singular
# integral and by the heat route with a Duhamel formula, then look at how
# the heat evolution of the commutator grows at small times.

import numpy as np

from fraclap import FracParams, GridFunction, Interval, assemble_dirichlet, build_cutoff
from fraclap import commutator_g_heat, commutator_g_integral, duhamel_small_time_slope
from fraclap import grid_for_box, make_domain, sobolev_norm, solve_dirichlet

grid = grid_for_box(1, -1.5, 1.5, 2.0 ** -8)
mask = make_domain(grid, Interval(-1.0, 1.0))
cut = build_cutoff(mask, Interval(-0.25, 0.25), Interval(-0.75, 0.75), 0.2)

# In[1]:

print(f"{'s':>5} {'||g||_2':>10} {'||g||_2/||u||_W':>16} {'heat vs integral':>18}")
for s in (0.25, 0.5, 0.75):
    params = FracParams(s)
    u = solve_dirichlet(assemble_dirichlet(mask, params), GridFunction.from_callable(grid, np.ones_like))
    gi = commutator_g_integral(u, cut, params, mask)
    gh = commutator_g_heat(u, cut, params)
    print(f"{s:5.2f} {gi.norm(2):10.4f} {gi.norm(2) / sobolev_norm(u, s):16.4f} "
          f"{(gh - gi).norm(2) / gi.norm(2):18.2e}")

# For smooth data the Duhamel term z_1(t) grows like t; the rough input
# (x - x0)_+^{s-1/2} near the cutoff transition brings it down to t^{(1+s)/2}.

# In[2]:

from fraclap.grid import bump_cdf

grid = grid_for_box(1, -1.5, 1.5, 2.0 ** -9)
mask = make_domain(grid, Interval(-1.0, 1.0))
cut = build_cutoff(mask, Interval(-0.25, 0.25), Interval(-0.75, 0.75), 0.2)
x0 = 0.5 + grid.h / 2
for s in (0.25, 0.5, 0.75):
    def rough(x):
        r = np.clip(x - x0, 0, None)
        lead = np.where(r > 0, np.where(r > 0, r, 1.0) ** (s - 0.5), 0.0)
        return lead * (bump_cdf((x + 0.9) / 0.08) - bump_cdf((x - 0.9) / 0.08))
    fit = duhamel_small_time_slope(GridFunction.from_callable(grid, rough), cut)
    print(f"s={s}: slope {fit.slope:.3f}, bound exponent {(1 + s) / 2:.3f}")
