import numpy as np
import pytest

from fraclap.grid import GridFunction, Interval, grid_for_box, make_domain


def bump(x, c=0.0, r=1.0):
    """exp(-1/(1-t^2)) on |t| < 1 with t = (x-c)/r; smooth and compactly supported."""
    t = (np.asarray(x, dtype=float) - c) / r
    out = np.zeros_like(t)
    m = np.abs(t) < 1
    out[m] = np.exp(-1.0 / (1.0 - t[m] ** 2))
    return out


@pytest.fixture
def unit_interval_setup():
    """Grid on [-1.5, 1.5] with h = 2^-7 and the domain (-1, 1)."""
    grid = grid_for_box(1, -1.5, 1.5, 2.0 ** -7)
    return grid, make_domain(grid, Interval(-1.0, 1.0))


def ones_on(grid):
    return GridFunction.from_callable(grid, lambda *x: np.ones_like(x[0]))
