import math

import mpmath
import numpy as np
import pytest
from scipy import integrate

from conftest import bump
from fraclap.fracop import (FracParams, HeatQuadrature, _moment_unit, apply_fl_integral,
                            apply_fl_multiplier, apply_fl_semigroup, exterior_tail, heat_convolve,
                            normalization_constant)
from fraclap.grid import GridFunction, build_grid, grid_for_box


def rel(a, b, mask=None):
    a, b = np.asarray(a), np.asarray(b)
    if mask is not None:
        a, b = a[mask], b[mask]
    return np.linalg.norm(a - b) / np.linalg.norm(b)


@pytest.mark.parametrize("N", [1, 2, 3])
@pytest.mark.parametrize("s", [0.1, 0.5, 0.9])
def test_normalization_constant_mpmath(N, s):
    ref = s * mpmath.power(4, s) * mpmath.gamma((N + 2 * s) / 2) / (mpmath.pi ** (N / 2) * mpmath.gamma(1 - s))
    assert normalization_constant(N, s) == pytest.approx(float(ref), rel=1e-13)


def test_normalization_constant_half_line():
    assert normalization_constant(1, 0.5) == pytest.approx(1 / math.pi, rel=1e-14)
    with pytest.raises(ValueError):
        normalization_constant(1, 1.0)


@pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
def test_lattice_moment_1d_cell_series(s):
    # K/2 = int_0^{1/2} r^b dr + sum_{m>=1} (int_{m-1/2}^{m+1/2} r^b dr - m^b), b = 1 - a.
    # Direct sum to M, then the cell defect expanded in powers m^{b-2k} summed with
    # convergent Hurwitz zeta tails.
    a = 2 * s
    b = mpmath.mpf(1) - a
    M = 2000
    with mpmath.workdps(30):
        head = mpmath.fsum((mpmath.power(m + 0.5, b + 1) - mpmath.power(m - 0.5, b + 1)) / (b + 1)
                           - mpmath.power(m, b) for m in range(1, M + 1))
        tail = 0
        for k in range(1, 5):
            coef = mpmath.ff(b, 2 * k) / (mpmath.factorial(2 * k + 1) * mpmath.power(4, k))
            tail += coef * mpmath.zeta(2 * k - b, M + 1)
        half = mpmath.power(0.5, b + 1) / (b + 1) + head + tail
    assert _moment_unit(1, a) == pytest.approx(float(2 * half), rel=1e-10)


@pytest.mark.parametrize("s", [0.3, 0.7])
def test_lattice_moment_2d_cell_series(s):
    # sum over cells of (cell integral - node value) of r_1^2 |r|^{-2-a}; centre cell in closed form
    a = 2 * s
    centre = 4 * integrate.quad(lambda th: (0.5 / math.cos(th)) ** (2 - a) / (2 - a), 0, math.pi / 4)[0]
    M = 40
    xg, wg = np.polynomial.legendre.leggauss(16)
    xg, wg = 0.5 * xg, 0.5 * wg
    i = np.arange(-M, M + 1, dtype=float)
    X, Y = np.meshgrid(i, i, indexing="ij")
    cells = np.zeros_like(X)
    for xa, wa in zip(xg, wg):
        for ya, wb in zip(xg, wg):
            px, py = X + xa, Y + ya
            cells += wa * wb * px * px * (px * px + py * py) ** (-(2 + a) / 2)
    r2 = X * X + Y * Y
    r2[M, M] = 1.0
    node = X * X * r2 ** (-(2 + a) / 2)
    diff = cells - node
    diff[M, M] = 0.0
    # cells beyond the box: midpoint defect (1/24) Lap f with angular mean f ~ r^{-a}/2
    L = M + 0.5
    tail = a / 48 * 8 * integrate.quad(lambda th: (L / math.cos(th)) ** (-a), 0, math.pi / 4)[0]
    assert _moment_unit(2, a) == pytest.approx(centre + diff.sum() + tail, rel=1e-4)


def test_exterior_tail_against_quadrature():
    g = grid_for_box(2, -1.0, 1.0, 0.25)
    a = 0.8
    tl = exterior_tail(g, a)
    lo, hi = g.lower, g.upper
    x0, y0 = g.axis(0)[2], g.axis(1)[5]

    def inside(r, th):
        x, y = x0 + r * math.cos(th), y0 + r * math.sin(th)
        return lo[0] <= x <= hi[0] and lo[1] <= y <= hi[1]

    # radial integral of r^{-1-a} from the box exit distance to infinity
    def exit_r(th):
        c, s_ = math.cos(th), math.sin(th)
        ts = []
        for d, v in ((c, x0), (s_, y0)):
            if d > 0:
                ts.append(((hi[0] if d == c else hi[1]) - v) / d)
            elif d < 0:
                ts.append(((lo[0] if d == c else lo[1]) - v) / d)
        return min(ts)

    ref = integrate.quad(lambda th: exit_r(th) ** (-a) / a, 0, 2 * math.pi, limit=200,
                         points=[math.atan2(hi[1] - y0, hi[0] - x0)])[0]
    assert tl[2, 5] == pytest.approx(ref, rel=1e-6)


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_integral_route_on_gaussian_matches_hypergeometric(s):
    g = grid_for_box(1, -6.0, 6.0, 2.0 ** -6)
    u = GridFunction.from_callable(g, lambda x: np.exp(-x * x))
    out = apply_fl_integral(u, FracParams(s)).values
    x = g.axis(0)
    ref = np.array([float(mpmath.power(4, s) * mpmath.gamma(0.5 + s) / mpmath.gamma(0.5)
                          * mpmath.hyp1f1(0.5 + s, 0.5, -xi * xi)) for xi in x])
    m = np.abs(x) < 3
    assert rel(out, ref, m) < 1e-3


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_integral_route_getoor_profile(s):
    h = 2.0 ** -9
    g = grid_for_box(1, -1.5, 1.5, h)
    u = GridFunction.from_callable(g, lambda x: np.clip(1 - x * x, 0, None) ** s)
    out = apply_fl_integral(u, FracParams(s)).values
    const = 4 ** s * math.gamma(1 + s) * math.gamma(0.5 + s) / math.gamma(0.5)
    m = np.abs(g.axis(0)) < 0.5
    assert np.abs(out[m] / const - 1).max() < 0.02


def test_integral_route_2d_gaussian():
    g = grid_for_box(2, -5.0, 5.0, 2.0 ** -3)
    s = 0.5
    u = GridFunction.from_callable(g, lambda x, y: np.exp(-x * x - y * y))
    out = apply_fl_integral(u, FracParams(s, 2)).values
    X, Y = g.coords()
    r2 = X * X + Y * Y
    f = np.vectorize(lambda z: float(mpmath.hyp1f1(1 + s, 1, -z)))
    ref = 4 ** s * math.gamma(1 + s) * f(r2)
    m = r2 < 4
    assert rel(out, ref, m) < 5e-3


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_three_routes_agree_on_bump(s):
    g = grid_for_box(1, -2.0, 2.0, 2.0 ** -8)
    u = GridFunction.from_callable(g, bump)
    p = FracParams(s)
    a = apply_fl_integral(u, p).values
    b = apply_fl_semigroup(u, p).values
    c = apply_fl_multiplier(u, s).values
    m = ~g.boundary_nodes()
    assert rel(c, a, m) < 1e-2
    assert rel(b, a, m) < 5e-2


def test_constant_and_zero_inputs():
    g = grid_for_box(1, -2.0, 2.0, 2.0 ** -6)
    z = GridFunction.zeros(g)
    assert np.all(apply_fl_integral(z, FracParams(0.5)).values == 0)
    assert np.all(apply_fl_multiplier(z, 0.5).values == 0)


def test_operator_requires_declared_support():
    g = grid_for_box(1, -1, 1, 0.1)
    u = GridFunction(g, np.zeros(g.shape), None)
    with pytest.raises(ValueError):
        apply_fl_integral(u, FracParams(0.5))


def test_heat_convolve_mass_and_semigroup():
    g = grid_for_box(1, -4.0, 4.0, 2.0 ** -6)
    u = GridFunction.from_callable(g, lambda x: bump(x, 0.2, 0.5))
    v = heat_convolve(u, 0.05)
    assert v.integral() == pytest.approx(u.integral(), rel=1e-10)
    w1 = heat_convolve(heat_convolve(u, 0.02), 0.03).values
    assert rel(w1, v.values) < 1e-8
    assert heat_convolve(u, 0.0) is u


def test_heat_convolve_matches_gaussian_closed_form():
    g = grid_for_box(1, -8.0, 8.0, 2.0 ** -5)
    u = GridFunction.from_callable(g, lambda x: np.exp(-x * x))
    t = 0.3
    ref = np.exp(-g.axis(0) ** 2 / (1 + 4 * t)) / math.sqrt(1 + 4 * t)
    assert rel(heat_convolve(u, t).values, ref) < 1e-6


def test_heat_quadrature_nodes():
    q = HeatQuadrature(1e-4, 10.0)
    n = q.nodes()
    assert len(n) % 2 == 1
    assert n[0] == pytest.approx(1e-4) and n[-1] == pytest.approx(10.0)
    w = q.weights(0.5)
    # Simpson in log t integrates t^{-s} dt/t... check on t^{1-s}: int t^{-s} dt
    assert np.sum(w * n) == pytest.approx((10.0 ** 0.5 - 1e-2) / 0.5, rel=1e-4)


def test_multiplier_image_correction_matters_at_small_s():
    g = grid_for_box(1, -2.0, 2.0, 2.0 ** -8)
    u = GridFunction.from_callable(g, bump)
    a = apply_fl_integral(u, FracParams(0.25)).values
    m = ~g.boundary_nodes()
    with_corr = rel(apply_fl_multiplier(u, 0.25).values, a, m)
    without = rel(apply_fl_multiplier(u, 0.25, image_correction=False).values, a, m)
    assert with_corr < 1e-3 < without


def test_homogeneity_and_linearity():
    g = build_grid(1, -2.0, 2.0 ** -6, 257)
    u = GridFunction.from_callable(g, lambda x: bump(x, 2.0, 1.0))
    v = GridFunction.from_callable(g, lambda x: bump(x, 1.5, 0.7) * x)
    p = FracParams(0.4)
    L = lambda f: apply_fl_integral(f, p).values
    assert np.allclose(L(3 * u - v), 3 * L(u) - L(v), atol=1e-12)
