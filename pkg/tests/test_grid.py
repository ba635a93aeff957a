import math

import numpy as np
import pytest
from scipy import integrate

from fraclap.grid import (Ball, CutoffPair, GridFunction, Interval, NodeList, Union, build_cutoff,
                          build_grid, bump_cdf, bump_density, grid_for_box, make_domain,
                          shape_from_dict)


def test_grid_coordinates_and_roundtrip():
    g = grid_for_box(2, -1.0, 1.0, 0.25)
    assert g.shape == (9, 9)
    assert g.axis(0)[0] == -1.0 and g.axis(0)[-1] == 1.0
    assert np.allclose(g.lower, -1.125) and np.allclose(g.upper, 1.125)
    assert g.from_dict(g.to_dict()) == g
    assert g.boundary_nodes().sum() == 32


def test_grid_rejects_tiny_extent():
    with pytest.raises(ValueError):
        build_grid(1, 0.0, 0.1, 2)


def test_interval_mask_rho_is_analytic():
    g = grid_for_box(1, -1.5, 1.5, 2.0 ** -5)
    m = make_domain(g, Interval(-1, 1))
    x = g.axis(0)
    assert np.array_equal(m.inside, np.abs(x) < 1)
    assert np.allclose(m.rho[m.inside], 1 - np.abs(x[m.inside]))
    assert m.count == len(m.index_map())


def test_ball_mask_in_2d():
    g = grid_for_box(2, -1.5, 1.5, 2.0 ** -4)
    m = make_domain(g, Ball((0.0, 0.0), 1.0))
    X, Y = g.coords()
    r = np.hypot(X, Y)
    assert np.array_equal(m.inside, r < 1)
    assert np.allclose(m.rho[m.inside], 1 - r[m.inside])


def test_shape_touching_box_is_rejected():
    g = grid_for_box(1, -1.0, 1.0, 0.1)
    with pytest.raises(ValueError):
        make_domain(g, Interval(-1.0, 0.5))


def test_nodelist_rho_uses_cell_faces():
    g = grid_for_box(1, -1.0, 1.0, 0.1)
    idx = [(i,) for i in range(5, 16)]
    m = make_domain(g, NodeList(tuple(idx)))
    # end nodes sit half a cell from the neighbouring outside cell
    assert m.rho[5] == pytest.approx(0.5 * 0.1)
    assert m.rho[10] == pytest.approx(5.5 * 0.1)


def test_union_and_shape_serialization():
    u = Union((Interval(-1, -0.2), Interval(0.2, 1)))
    assert shape_from_dict(u.to_dict()) == u
    pts = np.array([[-0.5], [0.0], [0.5]])
    assert list(u.contains(pts)) == [True, False, True]


def test_gridfunction_is_immutable_and_finite():
    g = grid_for_box(1, -1, 1, 0.25)
    f = GridFunction.from_callable(g, lambda x: x ** 2)
    with pytest.raises(ValueError):
        f.values[0] = 3.0
    with pytest.raises(ValueError):
        GridFunction(g, np.full(g.shape, np.nan))


def test_support_box_enforced_and_propagated():
    g = grid_for_box(1, -1, 1, 0.125)
    a = GridFunction.from_callable(g, lambda x: np.where(np.abs(x) < 0.3, 1.0, 0.0))
    b = GridFunction.from_callable(g, lambda x: np.where(x > 0.1, 1.0, 0.0))
    assert a.support == ((6,), (10,))
    assert (a * b).support == ((9,), (10,))
    assert (a + b).support == ((6,), (16,))
    with pytest.raises(ValueError):
        GridFunction(g, np.ones(g.shape), ((2,), (4,)))


def test_norms_and_integral():
    g = grid_for_box(1, -1, 1, 2.0 ** -8)
    f = GridFunction.from_callable(g, lambda x: np.ones_like(x))
    assert f.integral() == pytest.approx(2 + g.h)
    assert f.norm(math.inf) == 1.0
    assert (3 * f).norm(2) == pytest.approx(3 * f.norm(2))


def test_csv_roundtrip_is_exact(tmp_path):
    g = grid_for_box(2, -1, 1, 0.25)
    f = GridFunction.from_callable(g, lambda x, y: np.sin(x + 3 * y) / 7)
    path, meta = f.to_csv(tmp_path / "f.csv")
    back = GridFunction.read_csv(path)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)
    assert path.read_text().splitlines()[0] == "index,x,y,value"


def test_bump_cdf_matches_quadrature():
    for t in (-0.5, 0.0, 0.3, 0.9):
        ref = integrate.quad(bump_density, -1, t)[0]
        assert float(bump_cdf(np.array(t))) == pytest.approx(ref, abs=1e-12)


def test_cutoff_plateau_and_support():
    g = grid_for_box(1, -1.5, 1.5, 2.0 ** -7)
    m = make_domain(g, Interval(-1, 1))
    cut = build_cutoff(m, Interval(-0.25, 0.25), Interval(-0.75, 0.75), 0.2)
    x = g.axis(0)
    eta = cut.eta.values
    assert np.all(eta[np.abs(x) <= 0.25] == 1.0)
    assert np.all(eta[np.abs(x) >= 0.75] == 0.0)
    assert np.all((eta >= 0) & (eta <= 1))


def test_cutoff_in_2d_ball():
    g = grid_for_box(2, -1.5, 1.5, 2.0 ** -5)
    m = make_domain(g, Ball((0.0, 0.0), 1.0))
    cut = build_cutoff(m, Ball((0.0, 0.0), 0.3), Ball((0.0, 0.0), 0.8), 0.2)
    X, Y = g.coords()
    r = np.hypot(X, Y)
    assert np.all(cut.eta.values[r <= 0.3] == 1.0)
    assert np.all(cut.eta.values[r >= 0.8] == 0.0)


def test_cutoff_errors():
    g = grid_for_box(1, -1.5, 1.5, 2.0 ** -7)
    m = make_domain(g, Interval(-1, 1))
    with pytest.raises(ValueError, match="separation"):
        build_cutoff(m, Interval(-0.6, 0.6), Interval(-0.75, 0.75), 0.2)
    with pytest.raises(ValueError, match="2h"):
        build_cutoff(m, Interval(-0.25, 0.25), Interval(-0.75, 0.75), 0.01)
    with pytest.raises(ValueError, match="contained"):
        build_cutoff(m, Interval(-0.25, 0.25), Interval(-1.2, 1.2), 0.2)


def test_constant_cutoff_is_degenerate():
    g = grid_for_box(1, -1, 1, 0.1)
    c = CutoffPair.constant(g)
    assert c.degenerate and np.all(c.eta.values == 1.0)
