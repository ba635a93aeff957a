import math

import numpy as np
import pytest
from scipy import integrate

from conftest import bump
from fraclap.calculus import (commutator_g_heat, commutator_g_integral, duhamel_path,
                              duhamel_small_time_slope, duhamel_z, product_interaction,
                              split_I1_I2)
from fraclap.fracop import FracParams, apply_fl_integral, heat_convolve
from fraclap.grid import CutoffPair, GridFunction, Interval, build_cutoff, grid_for_box, make_domain


@pytest.fixture(scope="module")
def setup():
    g = grid_for_box(1, -1.5, 1.5, 2.0 ** -7)
    m = make_domain(g, Interval(-1, 1))
    cut = build_cutoff(m, Interval(-0.25, 0.25), Interval(-0.75, 0.75), 0.2)
    u = GridFunction.from_callable(g, lambda x: bump(x, 0.1, 0.8))
    v = GridFunction.from_callable(g, lambda x: bump(x, -0.2, 0.7) * (1 + x))
    return g, m, cut, u, v


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_discrete_leibniz_is_exact(setup, s):
    g, m, cut, u, v = setup
    p = FracParams(s)
    L = lambda f: apply_fl_integral(f, p)
    uv = (u * v).with_support()
    defect = L(uv) - u * L(v) - v * L(u) + product_interaction(u, v, p)
    assert defect.norm(2) / uv.norm(2) < 1e-10


def test_interaction_matches_quadrature(setup):
    g, m, cut, u, v = setup
    s = 0.5
    p = FracParams(s)
    I = product_interaction(u, v, p).values
    fu = lambda y: bump(y, 0.1, 0.8)
    fv = lambda y: bump(y, -0.2, 0.7) * (1 + y)
    for i in (150, 192, 230):
        x = g.axis(0)[i]
        f = lambda y: (fu(x) - fu(y)) * (fv(x) - fv(y)) / abs(x - y) ** (1 + 2 * s)
        ref = sum(integrate.quad(f, a, b, limit=400)[0]
                  for a, b in ((-3, x), (x, 3))) + 2 * fu(x) * fv(x) / (2 * s) / 3 ** (2 * s)
        assert I[i] == pytest.approx(p.c_ns * ref, rel=5e-3, abs=1e-4)


def test_interaction_symmetric(setup):
    g, m, cut, u, v = setup
    p = FracParams(0.3)
    assert np.allclose(product_interaction(u, v, p).values, product_interaction(v, u, p).values,
                       atol=1e-12)


@pytest.mark.parametrize("s", [0.25, 0.75])
def test_commutator_identity(setup, s):
    g, m, cut, u, v = setup
    d = {}
    commutator_g_integral(u, cut, FracParams(s), m, d)
    assert d["identity_residual"] < 1e-10


def test_commutator_vanishes_for_constant_cutoff(setup):
    g, m, cut, u, v = setup
    gfun = commutator_g_integral(u, CutoffPair.constant(g), FracParams(0.5))
    assert gfun.norm(2) < 1e-10 * u.norm(2) * 1e3


def test_split_sums_to_interaction(setup):
    g, m, cut, u, v = setup
    p = FracParams(0.4)
    i1, i2 = split_I1_I2(u, cut, m, p)
    total = product_interaction(u, cut.eta, p)
    assert (i1 + i2 - total).norm(2) < 1e-10 * total.norm(2)


def test_cutoff_not_nested_rejected():
    g = grid_for_box(1, -1.5, 1.5, 2.0 ** -6)
    big = make_domain(g, Interval(-1, 1))
    small = make_domain(g, Interval(-0.5, 0.5))
    cut = build_cutoff(big, Interval(-0.25, 0.25), Interval(-0.75, 0.75), 0.2)
    u = GridFunction.from_callable(g, lambda x: bump(x, 0, 0.4))
    with pytest.raises(ValueError):
        commutator_g_integral(u, cut, FracParams(0.5), small)


@pytest.mark.parametrize("t", [1e-3, 0.05, 1.0])
def test_duhamel_matches_closed_form(setup, t):
    g, m, cut, u, v = setup
    st = duhamel_z(u, cut, t)
    eta = cut.eta
    ref = heat_convolve((eta * u).with_support(), t) - eta * heat_convolve(u, t)
    assert (st.z - ref).norm(2) / ref.norm(2) < 5e-3
    assert (st.z1 - st.z2 - st.z).norm(2) < 1e-12


def test_duhamel_path_consistent_with_single_calls(setup):
    g, m, cut, u, v = setup
    ts = [0.01, 0.1]
    path = duhamel_path(u, cut, ts)
    for t, st in zip(ts, path):
        assert np.allclose(st.z.values, duhamel_z(u, cut, t).z.values, atol=1e-12)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_heat_route_matches_integral_route(setup, s):
    g, m, cut, u, v = setup
    p = FracParams(s)
    gi = commutator_g_integral(u, cut, p, m)
    d = {}
    gh = commutator_g_heat(u, cut, p, diagnostics=d)
    assert (gh - gi).norm(2) / gi.norm(2) < 0.05
    for key in ("A11", "A12", "A21", "A22"):
        assert d[key] >= 0 and math.isfinite(d[key])
    assert d["small_time_exponent"] >= (1 + s) / 2 - 1e-12


def test_small_time_slope_smooth_input(setup):
    # for smooth u the commutator grows linearly at small times
    g, m, cut, u, v = setup
    fit = duhamel_small_time_slope(u, cut)
    assert fit.slope == pytest.approx(1.0, abs=0.1)
