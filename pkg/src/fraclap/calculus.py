"""Product rule and the commutator remainder of a cut-off.

For a cut-off eta the remainder g in (-Delta)^s(eta u) = eta (-Delta)^s u + g
is computed two ways:

* the integral route, g = u (-Delta)^s eta - I_s(u, eta), with I_s the
  bilinear interaction term of the product rule;
* the heat route, g = (1/Gamma(-s)) int_0^inf z(t) t^{-1-s} dt, where z solves
  a forced heat equation with z(0) = 0 and is built by Duhamel's formula.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._fit import LineFit, linear_fit
from .fracop import (FracParams, HeatQuadrature, _mass_tail, apply_fl_integral, convolve_box,
                     discrete_laplacian, exterior_tail, heat_convolve, interior_nodes,
                     kernel_table, lattice_moment_constant)
from .grid import CutoffPair, DomainMask, GridFunction
from .theory import epsilon_window, gamma, gamma_reflection

__all__ = [
    "duhamel_small_time_slope",
    "DuhamelState",
    "product_interaction",
    "commutator_g_integral",
    "split_I1_I2",
    "duhamel_z",
    "duhamel_path",
    "commutator_g_heat",
    "epsilon_window",
]


def _edge_products(u: np.ndarray, v: np.ndarray, h: float) -> np.ndarray:
    """sum over axes and both neighbours of (u_nb - u)(v_nb - v) / h^2, zero beyond the box."""
    out = np.zeros_like(u)
    for a in range(u.ndim):
        pad = [(0, 0)] * u.ndim
        pad[a] = (1, 1)
        pu, pv = np.pad(u, pad), np.pad(v, pad)
        for lo in (0, 2):
            sl = [slice(None)] * u.ndim
            sl[a] = slice(lo, lo + u.shape[a])
            out = out + (pu[tuple(sl)] - u) * (pv[tuple(sl)] - v)
    return out / (h * h)


def _check_supported(*fs: GridFunction) -> None:
    for f in fs:
        if f.support is None:
            raise ValueError("inputs must declare compact support")
    if any(f.grid != fs[0].grid for f in fs):
        raise ValueError("inputs live on different grids")


def _eta_function(cut: CutoffPair) -> GridFunction:
    eta = cut.eta
    return eta if eta.support is not None else eta.with_support(eta.full_support)


def product_interaction(u: GridFunction, v: GridFunction, params: FracParams,
                        eval_set: np.ndarray | None = None) -> GridFunction:
    """Interaction term I_s(u,v) of the product rule.

    (-Delta)^s(uv) = u (-Delta)^s v + v (-Delta)^s u - I_s(u,v) holds exactly
    for the discrete operators: the singular-cell part uses the edge products
    that the discrete Laplacian produces for a product.
    """
    _check_supported(u, v)
    grid = u.grid
    if eval_set is None:
        eval_set = interior_nodes(grid)
    s, C, h = params.s, params.c_ns, grid.h
    a, b = u.values, v.values
    table = kernel_table(grid, 2.0 * s)
    row = convolve_box(np.ones(grid.shape), table)
    pair = a * b * row - a * convolve_box(b, table) - b * convolve_box(a, table) + convolve_box(a * b, table)
    K = lattice_moment_constant(grid.dim, s, h)
    sing = 0.5 * K * _edge_products(a, b, h)
    tail = exterior_tail(grid, 2.0 * s) * a * b
    out = C * (pair + sing + tail)
    return GridFunction(grid, np.where(eval_set, out, 0.0), None)


def _check_nesting(cut: CutoffPair, mask: DomainMask | None) -> None:
    if cut.degenerate or mask is None:
        return
    if cut.eta.grid != mask.grid:
        raise ValueError("cut-off and mask live on different grids")
    if np.any((cut.eta.values != 0) & ~mask.inside):
        raise ValueError("cut-off is not nested in the mask")


def commutator_g_integral(u: GridFunction, cut: CutoffPair, params: FracParams,
                          mask: DomainMask | None = None,
                          diagnostics: dict | None = None) -> GridFunction:
    """g = u (-Delta)^s eta - I_s(u, eta) by the singular-integral route.

    The identity g = (-Delta)^s(eta u) - eta (-Delta)^s u is also evaluated and
    its relative L^2 mismatch stored in ``diagnostics["identity_residual"]``.
    """
    _check_nesting(cut, mask)
    eta = _eta_function(cut)
    _check_supported(u, eta)
    if mask is not None and np.any((u.values != 0) & ~mask.inside):
        raise ValueError("u must vanish outside the domain")
    g = u * apply_fl_integral(eta, params) - product_interaction(u, eta, params)
    if diagnostics is not None:
        other = apply_fl_integral((eta * u).with_support(), params) - eta * apply_fl_integral(u, params)
        ng = g.norm(2)
        diagnostics["identity_residual"] = (other - g).norm(2) / ng if ng > 0 else (other - g).norm(2)
        diagnostics["g_l2"] = ng
    return g


def split_I1_I2(u: GridFunction, cut: CutoffPair, mask: DomainMask, params: FracParams
                ) -> tuple[GridFunction, GridFunction]:
    """Split I_s(u, eta) into the part over domain nodes and the exterior part.

    I1 sums over y in the domain (with the singular-cell term); I2 is
    u(x) eta(x) times the kernel mass of the box nodes outside the domain plus
    the analytic tail beyond the box.
    """
    _check_nesting(cut, mask)
    eta = _eta_function(cut)
    _check_supported(u, eta)
    grid = u.grid
    s, C, h = params.s, params.c_ns, grid.h
    ev = interior_nodes(grid)
    chi = mask.inside.astype(float)
    a, b = u.values * chi, eta.values * chi
    table = kernel_table(grid, 2.0 * s)
    w_in = convolve_box(chi, table)
    w_all = convolve_box(np.ones(grid.shape), table)
    pair = a * b * w_in - a * convolve_box(b, table) - b * convolve_box(a, table) + convolve_box(a * b, table)
    K = lattice_moment_constant(grid.dim, s, h)
    i1 = C * (pair + 0.5 * K * _edge_products(u.values, eta.values, h))
    i2 = C * u.values * eta.values * (w_all - w_in + exterior_tail(grid, 2.0 * s))
    return (GridFunction(grid, np.where(ev, i1, 0.0), None),
            GridFunction(grid, np.where(ev, i2, 0.0), None))


# --------------------------------------------------------------------------
# heat route
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DuhamelState:
    """Snapshot at time t of phi = e^{t Delta} u and z = z1 - z2."""

    t: float
    phi: GridFunction
    z: GridFunction
    z1: GridFunction
    z2: GridFunction


def _sources(phi: np.ndarray, eta: np.ndarray, lap_eta: np.ndarray, h: float
             ) -> tuple[np.ndarray, np.ndarray]:
    """(2 div(phi grad eta), phi Laplacian(eta)) with compact centred stencils."""
    div = np.zeros_like(phi)
    for a in range(phi.ndim):
        pad = [(0, 0)] * phi.ndim
        pad[a] = (1, 1)
        pp, pe = np.pad(phi, pad), np.pad(eta, pad)
        for lo in (0, 2):
            sl = [slice(None)] * phi.ndim
            sl[a] = slice(lo, lo + phi.shape[a])
            div = div + 0.5 * (pp[tuple(sl)] + phi) * (pe[tuple(sl)] - eta)
    return 2.0 * div / (h * h), phi * lap_eta


def _graded_nodes(t: float, t_first: float, ratio: float) -> np.ndarray:
    """Breakpoints on [0, t]: geometric in tau up to t/2, geometric in t - tau after."""
    half = 0.5 * t
    rungs = []
    r = t_first
    while r < half:
        rungs.append(r)
        r *= ratio
    rungs = np.asarray(rungs)
    return np.unique(np.concatenate([[0.0], rungs, [half], t - rungs[::-1], [t]]))


class _Duhamel:
    """Duhamel quadrature z(t) = int_0^t G(t - tau) * src(tau) dtau.

    The tau integral is split at t/2 and graded geometrically towards both
    ends (the source may vary quickly near tau = 0, the kernel varies quickly
    near tau = t), with composite Simpson on ``n_sub`` sub-steps per piece.
    Sources are supported where eta is not constant, so every term is a single
    convolution of compactly supported data and nothing is truncated.
    z1 and z2 use the two source parts separately.
    """

    def __init__(self, u: GridFunction, eta: GridFunction, n_sub: int, ratio: float = 1.25,
                 t_first: float | None = None):
        if n_sub < 2:
            raise ValueError("n_sub must be >= 2")
        self.u, self.eta = u, eta
        self.grid = u.grid
        self.lap_eta = discrete_laplacian(eta.values, self.grid.h)
        self.n_sub = n_sub + n_sub % 2
        self.ratio = ratio
        self.t_first = 0.25 * self.grid.h ** 2 if t_first is None else t_first
        self.full = ((0,) * self.grid.dim, tuple(n - 1 for n in self.grid.shape))
        self._cache: dict = {}

    def _source(self, tau: float) -> tuple[GridFunction, GridFunction]:
        key = float(tau)
        if key not in self._cache:
            s1, s2 = _sources(heat_convolve(self.u, key).values, self.eta.values, self.lap_eta,
                              self.grid.h)
            self._cache[key] = (GridFunction(self.grid, s1, self.full),
                                GridFunction(self.grid, s2, self.full))
        return self._cache[key]

    def state(self, t: float) -> DuhamelState:
        t = float(t)
        z1 = np.zeros(self.grid.shape)
        z2 = np.zeros(self.grid.shape)
        if t > 0:
            brk = _graded_nodes(t, min(self.t_first, 0.25 * t), self.ratio)
            m = self.n_sub
            simpson = np.ones(m + 1)
            simpson[1:-1:2] = 4.0
            simpson[2:-1:2] = 2.0
            for a, b in zip(brk[:-1], brk[1:]):
                taus = np.linspace(a, b, m + 1)
                for tau, c in zip(taus, simpson * (b - a) / (3.0 * m)):
                    s1, s2 = self._source(tau)
                    lag = max(t - tau, 0.0)
                    z1 += c * heat_convolve(s1, lag).values
                    z2 += c * heat_convolve(s2, lag).values
        g1, g2 = GridFunction(self.grid, z1, self.full), GridFunction(self.grid, z2, self.full)
        return DuhamelState(t, heat_convolve(self.u, t), g1 - g2, g1, g2)


def duhamel_z(u: GridFunction, cut: CutoffPair, t: float, n_sub: int = 2,
              ratio: float = 1.25) -> DuhamelState:
    """Solve z_t - Delta z = 2 div(phi grad eta) - phi Delta eta, z(0) = 0, at time t.

    z1 collects the divergence source and z2 the phi * Laplacian(eta) source,
    so z = z1 - z2.  See :class:`_Duhamel` for the tau quadrature.
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    if n_sub < 2:
        raise ValueError("n_sub must be >= 2")
    eta = _eta_function(cut)
    _check_supported(u, eta)
    _check_cut_resolution(cut, u.grid.h)
    return _Duhamel(u, eta, n_sub, ratio).state(t)


def duhamel_path(u: GridFunction, cut: CutoffPair, times, n_sub: int = 2,
                 ratio: float = 1.25) -> list[DuhamelState]:
    """Duhamel states at each of ``times`` (sources are shared between times)."""
    eta = _eta_function(cut)
    _check_supported(u, eta)
    _check_cut_resolution(cut, u.grid.h)
    d = _Duhamel(u, eta, n_sub, ratio)
    return [d.state(t) for t in times]


def duhamel_small_time_slope(u: GridFunction, cut: CutoffPair, n_times: int = 8,
                             t_max: float | None = None, component: str = "z1",
                             n_sub: int = 2) -> LineFit:
    """Fitted exponent beta in ||z_i(t)||_2 ~ t^beta over the small-time window.

    The window is t in [h^2, t_max] with t_max = (moll_radius/4)^2 by default:
    once the diffusion length sqrt(t) reaches the width of the cut-off
    transition band the norm saturates and the local slope rolls over.
    """
    h = u.grid.h
    if t_max is None:
        t_max = (cut.moll_radius / 4.0) ** 2
    if t_max <= h * h:
        raise ValueError("small-time window is empty; refine the grid")
    times = np.geomspace(h * h, t_max, n_times)
    states = duhamel_path(u, cut, times, n_sub)
    norms = np.array([getattr(st, component).norm() for st in states])
    if np.any(norms <= 0):
        raise ValueError("z vanishes on the window; no exponent to fit")
    return linear_fit(np.log(times), np.log(norms))


def _check_cut_resolution(cut: CutoffPair, h: float) -> None:
    if not cut.degenerate and cut.moll_radius <= 4.0 * h:
        raise ValueError("cut-off mollification radius must exceed 4h for discrete derivatives")


def commutator_g_heat(u: GridFunction, cut: CutoffPair, params: FracParams,
                      quad: HeatQuadrature | None = None, n_sub: int = 2,
                      diagnostics: dict | None = None) -> GridFunction:
    """g = (1/Gamma(-s)) int_0^inf z(t) t^{-1-s} dt with z from :func:`duhamel_z`.

    Below t_min, z is extended by a power law t^beta, with beta fitted from the
    first two time nodes and never below (1+s)/2, the small-time growth bound
    of z; beyond t_max, z is replaced by its Gaussian far-field
    form (mass(eta u) - eta mass(u)) G(x - centroid, t).  ``diagnostics``
    receives the four partial sums of (s/Gamma(1-s)) int ||z_i(t)||_2 t^{-1-s} dt
    for i = 1, 2 over t < 1 and t > 1, keyed A11, A12, A21, A22.
    """
    eta = _eta_function(cut)
    _check_supported(u, eta)
    grid = u.grid
    s, h, N = params.s, grid.h, grid.dim
    if quad is None:
        quad = HeatQuadrature.default(grid, s)
    quad.check_alpha(s)
    ts, ws = quad.nodes(), quad.weights(s)
    states = duhamel_path(u, cut, ts, n_sub)
    acc = np.zeros(grid.shape)
    n1 = np.empty(ts.size)
    n2 = np.empty(ts.size)
    for k, (w, st) in enumerate(zip(ws, states)):
        acc += w * st.z.values
        n1[k], n2[k] = st.z1.norm(2), st.z2.norm(2)
    # local growth exponent of ||z|| at the first two nodes; the small-time
    # bound t^{(1+s)/2} is its floor
    beta_bound = 0.5 * (1.0 + s)
    beta = beta_bound
    if n1[0] + n2[0] > 0 and states[1].z.norm(2) > 0 and states[0].z.norm(2) > 0:
        fitted = math.log(states[1].z.norm(2) / states[0].z.norm(2)) / math.log(ts[1] / ts[0])
        beta = min(max(fitted, beta_bound), 2.0)
    small = states[0].z.values * quad.t_min ** (-s) / (beta - s)
    coords = grid.coords()
    ev = u.values
    mu = float(ev.sum())
    large = np.zeros(grid.shape)
    if mu != 0.0:
        cen = [float(np.sum(c * ev) / mu) for c in coords]
        r2 = sum((c - x0) ** 2 for c, x0 in zip(coords, cen))
        m_eu = (eta * u).integral()
        large = (m_eu - eta.values * u.integral()) * _mass_tail(r2, quad.t_max, N, s)
    gam = gamma_reflection(s)
    g = (small + acc + large) / gam
    g = np.where(grid.boundary_nodes(), 0.0, g)
    gf = GridFunction(grid, g, None)
    ng = gf.norm(2)
    small_norm = float(np.sqrt(np.sum(small ** 2) * h ** N)) / abs(gam)
    if ng > 0 and small_norm > 0.5 * ng:
        raise RuntimeError("heat quadrature under-resolved: small-time correction dominates")
    if diagnostics is not None:
        pref = s / gamma(1.0 - s)
        early, late = ts <= 1.0, ts > 1.0
        diagnostics.update({
            "A11": float(pref * np.sum((ws * n1)[early])),
            "A12": float(pref * np.sum((ws * n2)[early])),
            "A21": float(pref * np.sum((ws * n1)[late])),
            "A22": float(pref * np.sum((ws * n2)[late])),
            "small_time_exponent": beta,
            "small_time_exponent_bound": beta_bound,
            "small_time_correction_l2": small_norm,
            "large_time_correction_max": float(np.abs(large).max() / abs(gam)),
            "quadrature_nodes": quad.n_nodes,
            "alpha": quad.alpha,
            "large_time_bound_exponent": 1.0 - s - 0.5 * quad.alpha,
        })
    return gf
