import math

import numpy as np
import pytest
import scipy.io

from conftest import bump, ones_on
from fraclap.dirichlet import (SolveReport, assemble_dirichlet, bilinear_energy, eigen_dirichlet,
                               semigroup_apply, semigroup_solve, solve_dirichlet,
                               ultracontractive_times, ultracontractivity_probe)
from fraclap.fracop import FracParams, apply_fl_integral
from fraclap.grid import Ball, GridFunction, Interval, grid_for_box, make_domain

# first Dirichlet eigenvalue of (-Delta)^{1/2} on (-1,1), known to 13 digits
LAMBDA1_HALF = 1.1577738836977


def getoor_exact(x2, N, s):
    return np.clip(1 - x2, 0, None) ** s / (4 ** s * math.gamma(1 + s) * math.gamma(N / 2 + s) / math.gamma(N / 2))


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_getoor_interval(s):
    g = grid_for_box(1, -1.5, 1.5, 2.0 ** -8)
    m = make_domain(g, Interval(-1, 1))
    rep = SolveReport()
    u = solve_dirichlet(assemble_dirichlet(m, FracParams(s)), ones_on(g), rep)
    x = g.axis(0)
    ex = getoor_exact(x * x, 1, s)
    sel = np.abs(x) < 0.5
    assert np.linalg.norm((u.values - ex)[sel]) / np.linalg.norm(ex[sel]) < 0.01
    assert rep.relative_residual < 1e-10 and rep.method == "cholesky"


def test_getoor_disc():
    s = 0.5
    g = grid_for_box(2, -1.5, 1.5, 2.0 ** -4)
    m = make_domain(g, Ball((0.0, 0.0), 1.0))
    u = solve_dirichlet(assemble_dirichlet(m, FracParams(s, 2)), ones_on(g))
    X, Y = g.coords()
    r2 = X * X + Y * Y
    ex = getoor_exact(r2, 2, s)
    sel = r2 < 0.25
    assert np.linalg.norm((u.values - ex)[sel]) / np.linalg.norm(ex[sel]) < 0.02


def test_matrix_rows_reproduce_integral_route(unit_interval_setup):
    g, m = unit_interval_setup
    p = FracParams(0.4)
    op = assemble_dirichlet(m, p)
    u = GridFunction.from_callable(g, lambda x: bump(x, 0.1, 0.8))
    a = op.matvec(op.restrict(u))
    b = apply_fl_integral(u, p).values.ravel()[op.index_map]
    assert np.allclose(a, b, rtol=1e-10, atol=1e-10 * np.abs(b).max())


def test_symmetric_positive_definite(unit_interval_setup):
    g, m = unit_interval_setup
    op = assemble_dirichlet(m, FracParams(0.3))
    assert op.report()["max_asymmetry"] == 0.0
    lam, _ = op.spectrum()
    assert lam.min() > 0


def test_matrix_free_matches_dense(unit_interval_setup):
    g, m = unit_interval_setup
    p = FracParams(0.6)
    dense = assemble_dirichlet(m, p)
    free = assemble_dirichlet(m, p, dense_limit=10)
    assert not free.dense
    v = np.random.default_rng(1).standard_normal(dense.size)
    assert np.allclose(free.matvec(v), dense.matvec(v), rtol=1e-10, atol=1e-9)
    f = ones_on(g)
    rep = SolveReport()
    u_free = solve_dirichlet(free, f, rep)
    u_dense = solve_dirichlet(dense, f)
    assert rep.method == "cg" and rep.iterations > 0
    assert np.abs(u_free.values - u_dense.values).max() < 1e-9


def test_energy_matches_matrix(unit_interval_setup):
    g, m = unit_interval_setup
    p = FracParams(0.5)
    op = assemble_dirichlet(m, p)
    u = op.extend(np.random.default_rng(2).standard_normal(op.size))
    v = op.extend(np.random.default_rng(3).standard_normal(op.size))
    e = bilinear_energy(u, v, p)
    ref = float(op.restrict(v) @ op.matvec(op.restrict(u))) * g.h
    assert e == pytest.approx(ref, rel=1e-10)
    assert bilinear_energy(u, v, p) == bilinear_energy(v, u, p)


def test_first_eigenvalue_converges():
    errs = []
    for k in (7, 8, 9):
        g = grid_for_box(1, -1.5, 1.5, 2.0 ** -k)
        m = make_domain(g, Interval(-1, 1))
        pair = eigen_dirichlet(assemble_dirichlet(m, FracParams(0.5)), 1)[0]
        errs.append(abs(pair.lam - LAMBDA1_HALF))
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-3


def test_eigenpairs_normalized_and_matrix_free_agree(unit_interval_setup):
    g, m = unit_interval_setup
    p = FracParams(0.75)
    dense = eigen_dirichlet(assemble_dirichlet(m, p), 3)
    free = eigen_dirichlet(assemble_dirichlet(m, p, dense_limit=10), 2)
    assert dense[0].lam < dense[1].lam < dense[2].lam
    for a, b in zip(dense, free):
        assert a.lam == pytest.approx(b.lam, rel=1e-8)
        assert a.vec.norm(2) == pytest.approx(1.0, rel=1e-12)
        assert np.abs(a.vec.values - b.vec.values).max() < 1e-6
    assert dense[0].vec.values.min() >= -1e-12


def test_semigroup_solve_matches_direct(unit_interval_setup):
    g, m = unit_interval_setup
    op = assemble_dirichlet(m, FracParams(0.5))
    f = ones_on(g)
    rep = SolveReport()
    v = semigroup_solve(op, f, T_max=100.0, n_steps=200, report=rep)
    u = solve_dirichlet(op, f)
    assert (v - u).norm(2) / u.norm(2) < 1e-6
    assert rep.truncation_indicator <= rep.spectral_bound * (1 + 1e-8)
    with pytest.raises(RuntimeError):
        semigroup_solve(op, f, T_max=0.5, n_steps=10)


def test_semigroup_apply_preserves_positivity_and_decays(unit_interval_setup):
    g, m = unit_interval_setup
    op = assemble_dirichlet(m, FracParams(0.5))
    f = ones_on(g)
    a = semigroup_apply(op, f, 0.1)
    b = semigroup_apply(op, f, 1.0)
    assert a.min() > -1e-12 and np.linalg.norm(b) < np.linalg.norm(a)


def test_ultracontractive_slope_half():
    g = grid_for_box(1, -1.5, 1.5, 2.0 ** -8)
    m = make_domain(g, Interval(-1, 1))
    op = assemble_dirichlet(m, FracParams(0.5))
    f = GridFunction.from_callable(g, lambda x: np.where(np.abs(x) < 0.5 * g.h, 1.0, 0.0))
    fit = ultracontractivity_probe(op, f, ultracontractive_times(op))
    assert fit.slope == pytest.approx(-1.0, abs=0.05)
    with pytest.raises(ValueError):
        ultracontractivity_probe(op, f, [g.h ** 3])
    with pytest.raises(ValueError):
        ultracontractivity_probe(op, -f, ultracontractive_times(op))


def test_matrix_market_export(tmp_path, unit_interval_setup):
    g, m = unit_interval_setup
    op = assemble_dirichlet(m, FracParams(0.5))
    path = op.export_matrix_market(tmp_path / "A.mtx")
    back = np.asarray(scipy.io.mmread(str(path)).todense()) if hasattr(scipy.io.mmread(str(path)), "todense") \
        else scipy.io.mmread(str(path))
    assert np.allclose(back, op.matrix, rtol=1e-15, atol=0)


def test_zero_source_gives_zero():
    g = grid_for_box(1, -1.5, 1.5, 2.0 ** -6)
    m = make_domain(g, Interval(-1, 1))
    op = assemble_dirichlet(m, FracParams(0.5))
    assert np.all(solve_dirichlet(op, GridFunction.zeros(g)).values == 0)
