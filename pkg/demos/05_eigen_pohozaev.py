# # Eigenfunctions and the Pohozaev identity
#
# Dirichlet eigenfunctions vanish like dist^s at the boundary, and the
# Pohozaev identity ties s lambda ||u||^2 to the boundary trace of u/dist^s.
# We check both on the interval.

from fraclap import FracParams, Interval, assemble_dirichlet, boundary_exponent_probe
from fraclap import eigen_dirichlet, grid_for_box, make_domain, pohozaev_residual

# In[1]:

print(f"{'s':>5} {'h':>9} {'lambda_1':>10} {'boundary exp.':>14} {'Pohozaev residual':>18}")
for s in (0.5, 0.75):
    for k in (8, 9, 10):
        grid = grid_for_box(1, -1.5, 1.5, 2.0 ** -k)
        mask = make_domain(grid, Interval(-1.0, 1.0))
        pair = eigen_dirichlet(assemble_dirichlet(mask, FracParams(s)), 1)[0]
        beta = boundary_exponent_probe(pair.vec, mask).slope
        res = pohozaev_residual(pair, mask, s)[2]
        print(f"{s:5.2f} {grid.h:9.2e} {pair.lam:10.5f} {beta:14.3f} {res:18.2e}")
