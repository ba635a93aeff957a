# # Smooth inside, a square-root cusp at the edge
#
# The Getoor solution is analytic inside the interval and behaves like
# dist(x, boundary)^{1/2} at the edge.  The probe measures how fractional
# norms blow up under refinement: with a cutoff inside the domain none do up
# to order 1.9, while the global norms break down at order s + 1/p = 1.

import numpy as np

from fraclap import CutSpec, FracParams, GridFunction, Interval, assemble_dirichlet
from fraclap import boundary_exponent_probe, grid_for_box, local_regularity_probe, make_domain
from fraclap import solve_dirichlet


def getoor(h):
    grid = grid_for_box(1, -1.5, 1.5, h)
    mask = make_domain(grid, Interval(-1.0, 1.0))
    op = assemble_dirichlet(mask, FracParams(0.5))
    return solve_dirichlet(op, GridFunction.from_callable(grid, np.ones_like)), mask


scan = [round(0.1 * i, 2) for i in range(1, 20)]
cuts = [None, CutSpec("interior", Interval(-0.25, 0.25), Interval(-0.75, 0.75), 0.2)]
report = local_regularity_probe(getoor, None, 2.0, cuts, scan, [2.0 ** -7, 2.0 ** -8, 2.0 ** -9], s=0.5)

# In[1]:

for label in report.threshold:
    print(f"{label:>9}: {report.verdict(label)}")

# In[2]:

# growth exponent of each norm under refinement (0 means bounded)
print(" " * 10 + " ".join(f"{sg:5.1f}" for sg in scan))
for label in report.threshold:
    row = " ".join(f"{report.fits[(label, sg)].slope:5.2f}" for sg in scan)
    print(f"{label:>9}: {row}")

# The boundary exponent is read off directly from u against the distance.

# In[3]:

u, mask = getoor(2.0 ** -9)
print("boundary exponent:", round(boundary_exponent_probe(u, mask).slope, 3))
