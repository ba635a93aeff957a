"""Discrete fractional Laplacian toolkit on uniform grids."""
from .calculus import (commutator_g_heat, commutator_g_integral, duhamel_path,
                       duhamel_small_time_slope, duhamel_z, product_interaction, split_I1_I2)
from .dirichlet import (DirichletOperator, EigenPair, SolveReport, assemble_dirichlet,
                        bilinear_energy, eigen_dirichlet, semigroup_apply, semigroup_solve,
                        solve_dirichlet, ultracontractive_times, ultracontractivity_probe)
from .fracop import (FracParams, HeatQuadrature, apply_fl_integral, apply_fl_multiplier,
                     apply_fl_semigroup, heat_convolve, normalization_constant)
from .grid import (Ball, CutoffPair, DomainMask, Grid, GridFunction, Interval, NodeList, Union,
                   build_cutoff, build_grid, grid_for_box, make_domain)
from .regularity import (CutSpec, RegularityReport, besov_norm, besov_seminorm,
                         boundary_exponent_probe, gagliardo_seminorm, local_regularity_probe,
                         pohozaev_residual, potential_norm, sobolev_norm)
from .theory import (ExponentRecord, embedding_map, epsilon_window, gamma_reflection,
                     gaussian_decay_exponent, semigroup_decay_exponent, young_triple_valid)

__all__ = [name for name in dir() if not name.startswith("_")
           and name not in {"calculus", "dirichlet", "fracop", "grid", "regularity", "theory"}]
