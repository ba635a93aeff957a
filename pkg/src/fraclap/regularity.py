"""Fractional norms, regularity probes, boundary fits and the Pohozaev check.

Norms treat a grid function as extended by zero outside the grid box.  The
difference moduli M(d) = sum_x |u(x+d) - u(x)|^p (or the second-difference
analogue) are computed once per function and reused for every order sigma.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import mpmath
from scipy import integrate

from ._fit import LineFit, linear_fit
from .dirichlet import EigenPair
from .fracop import apply_fl_multiplier, exterior_tail
from .grid import Ball, CutoffPair, DomainMask, GridFunction, Interval, build_cutoff
from .theory import embedding_map, gamma

__all__ = [
    "gagliardo_seminorm",
    "besov_norm",
    "besov_seminorm",
    "potential_norm",
    "sobolev_norm",
    "CutSpec",
    "RegularityReport",
    "local_regularity_probe",
    "boundary_exponent_probe",
    "pohozaev_residual",
    "embedding_map",
]


# --------------------------------------------------------------------------
# difference moduli
# --------------------------------------------------------------------------


def _offsets(shape: tuple, reach: Sequence[int]) -> list[tuple]:
    """Lattice offsets d != 0 with |d_a| <= reach[a], one per +-d pair (d > 0 lexicographically)."""
    out = []
    for d in np.ndindex(*[2 * r + 1 for r in reach]):
        dd = tuple(int(i) - r for i, r in zip(d, reach))
        if dd > (0,) * len(dd):
            out.append(dd)
    return out


def _shifted(v: np.ndarray, d: tuple) -> np.ndarray:
    """v(x + d) with zero extension beyond the box."""
    out = np.zeros_like(v)
    src, dst = [], []
    for a, k in enumerate(d):
        n = v.shape[a]
        if k >= 0:
            src.append(slice(k, n))
            dst.append(slice(0, n - k))
        else:
            src.append(slice(0, n + k))
            dst.append(slice(-k, n))
    out[tuple(dst)] = v[tuple(src)]
    return out


def _moduli(v: np.ndarray, p: float, order: int, offsets: list[tuple],
            weight: np.ndarray | None = None) -> np.ndarray:
    """M(d) = sum_x chi |difference|^p for each offset; ``weight`` restricts pairs."""
    out = np.empty(len(offsets))
    for i, d in enumerate(offsets):
        if order == 1:
            diff = _shifted(v, d) - v
            if weight is not None:
                diff = diff * (_shifted(weight, d) * weight)
        else:
            m = tuple(-k for k in d)
            diff = _shifted(v, d) - 2.0 * v + _shifted(v, m)
        out[i] = np.sum(np.abs(diff) ** p)
    return out


def _gradient_lp(v: np.ndarray, h: float, p: float) -> np.ndarray:
    """Pointwise |grad u| by centred differences (one-sided on the box edges)."""
    if v.ndim == 1:
        return np.abs(np.gradient(v, h))
    return np.sqrt(sum(gr * gr for gr in np.gradient(v, h)))


def _lattice_defect(N: int, c: float) -> float:
    """lim_M [int_{box_M} |r|^c dr - sum_{m != 0 in box_M} |m|^c] on the unit lattice.

    The analytic continuation of minus the punctured lattice sum: -2 zeta(-c)
    in 1D and -4 zeta(-c/2) beta(-c/2) in 2D (beta the Dirichlet beta function).
    """
    if N == 1:
        return float(-2.0 * mpmath.zeta(-c))
    if N == 2:
        z = -c / 2.0
        return float(-4.0 * mpmath.zeta(z) * mpmath.dirichlet(z, [0, 1, 0, -1]))
    raise ValueError("only N in {1,2} is supported")


def _mean_abs_cos_power(N: int, p: float) -> float:
    """Average of |theta_1|^p over unit directions theta (1 in 1D)."""
    if N == 1:
        return 1.0
    return math.gamma((p + 1.0) / 2.0) / (math.sqrt(math.pi) * math.gamma(p / 2.0 + 1.0))


def _axis_derivative_norms(v: np.ndarray, h: float, p: float, order: int) -> list[float]:
    """||d^order v / dx_a^order||_p for each axis a (zero extension)."""
    out = []
    for a in range(v.ndim):
        if order == 1:
            d = np.gradient(v, h, axis=a)
        else:
            w = np.pad(v, [(1, 1) if b == a else (0, 0) for b in range(v.ndim)])
            sl = lambda k: tuple(slice(k, k + v.shape[a]) if b == a else slice(None) for b in range(v.ndim))
            d = (w[sl(2)] - 2.0 * w[sl(1)] + w[sl(0)]) / h ** 2
        out.append(float((np.sum(np.abs(d) ** p) * h ** v.ndim) ** (1.0 / p)))
    return out


# --------------------------------------------------------------------------
# norms
# --------------------------------------------------------------------------


def gagliardo_seminorm(u: GridFunction, sigma: float, p: float = 2.0,
                       region: np.ndarray | None = None) -> float:
    """(sum_{x != y} |u(x)-u(y)|^p h^{2N}/|x-y|^{N+p sigma})^{1/p}.

    With ``region=None`` the double sum runs over all of R^N: box pairs plus
    the analytic exterior tail 2 sum_x |u(x)|^p tail(x) h^N.  With a boolean
    ``region`` only pairs inside it are counted.  The near-diagonal pairs the
    lattice sum misrepresents are restored with the regularized lattice defect
    of |r|^{p - N - p sigma}, weighted by |grad u|^p (exact for p = 2, angular
    average otherwise).
    """
    if not (0.0 < sigma < 1.0):
        raise ValueError("sigma must lie in (0,1)")
    if p < 1:
        raise ValueError("p must be >= 1")
    grid = u.grid
    h, N = grid.h, grid.dim
    v = u.values
    # box pairs only; pairs with one point outside the box go to the analytic tail
    chi = np.ones(grid.shape) if region is None else np.asarray(region, dtype=float).reshape(grid.shape)
    offsets = _offsets(grid.shape, [n - 1 for n in grid.shape])
    M = _moduli(v * chi, p, 1, offsets, chi)
    dist = np.array([math.sqrt(sum(k * k for k in d)) for d in offsets]) * h
    total = 2.0 * np.sum(M * h ** (2 * N) / dist ** (N + p * sigma))
    grad = _gradient_lp(v, h, p) * chi
    c = p - N - p * sigma
    total += (np.sum(grad ** p) * h ** N * _mean_abs_cos_power(N, p)
              * _lattice_defect(N, c) * h ** (N + c))
    if region is None:
        total += 2.0 * np.sum(np.abs(v) ** p * exterior_tail(grid, p * sigma)) * h ** N
    return float(total ** (1.0 / p))


def sobolev_norm(u: GridFunction, sigma: float, p: float = 2.0) -> float:
    """||u||_{L^p} + [u]_{W^{sigma,p}(R^N)}."""
    return u.norm(p) + gagliardo_seminorm(u, sigma, p)


def _support_diameter(u: GridFunction) -> float:
    nz = np.nonzero(u.values)
    if len(nz[0]) == 0:
        return 0.0
    return math.sqrt(sum(((i.max() - i.min()) * u.grid.h) ** 2 for i in nz))


def besov_seminorm(u: GridFunction, sigma: float, p: float = 2.0, q: float = 2.0) -> float:
    """(int ||Delta_y u||_p^q |y|^{-N - sigma q} dy)^{1/q} on lattice shifts.

    First differences for sigma < 1, second differences u(x+y)-2u(x)+u(x-y)
    for 1 <= sigma < 2.  Shifts reach half the box; beyond that the exact
    value ||Delta_y u||_p = c ||u||_p (c = 2^{1/p} or (2+2^p... )^{1/p}) holds
    whenever the support diameter is at most that reach, and its integral is
    added analytically.  The shifts near y = 0 are corrected with the regularized lattice defect of the
    Taylor model.
    """
    if sigma >= 2 or sigma <= 0:
        raise ValueError("sigma must lie in (0,2)")
    if p < 1 or q < 1:
        raise ValueError("p and q must be >= 1")
    grid = u.grid
    h, N = grid.h, grid.dim
    order = 1 if sigma < 1 else 2
    reach = [(n - 1) // 2 for n in grid.shape]
    offsets = _offsets(grid.shape, reach)
    # zero padding so that every x with x +- d in the box is counted
    v = np.pad(u.values, [(r, r) for r in reach])
    M = _moduli(v, p, order, offsets)
    dist = np.array([math.sqrt(sum(k * k for k in d)) for d in offsets]) * h
    a = N + sigma * q
    total = 2.0 * np.sum((M * h ** N) ** (q / p) * h ** N / dist ** a)
    # tail beyond the shift box: no overlap once |y| exceeds the support diameter
    Y = min(reach) * h + 0.5 * h
    up = float(np.sum(np.abs(v) ** p) * h ** N)
    if _support_diameter(u) <= min(reach) * h:
        const = 2.0 if order == 1 else 2.0 + 2.0 ** p
        tail = (const * up) ** (q / p)
        if N == 1:
            total += tail * 2.0 * Y ** (-sigma * q) / (sigma * q)
        else:
            from .fracop import _cos_power_integral
            b = sigma * q
            total += tail * 8.0 * Y ** (-b) * float(_cos_power_integral(np.array(math.pi / 4), b)) / b
    # near y = 0: ||Delta_y u||_p ~ |y|^order ||D^order u||_p, restored with the lattice defect
    G = float(np.mean(np.array(_axis_derivative_norms(v, h, p, order)) ** q))
    c = q * order - N - sigma * q
    total += G * _lattice_defect(N, c) * h ** (N + c)
    return float(total ** (1.0 / q))


def besov_norm(u: GridFunction, sigma: float, p: float = 2.0, q: float = 2.0) -> float:
    """||u||_{L^p} + Besov seminorm (see :func:`besov_seminorm`)."""
    return u.norm(p) + besov_seminorm(u, sigma, p, q)


def potential_norm(u: GridFunction, s: float, p: float = 2.0, pad_factor: int = 4,
                   padded: bool = False) -> float:
    """||u||_p + ||(-Delta)^s u||_p with the multiplier route.

    ``padded=True`` measures the second term on the whole periodic padded box
    (no image correction), which is the setting of the Plancherel identity.
    """
    if not padded:
        return u.norm(p) + apply_fl_multiplier(u, s, pad_factor).norm(p)
    grid = u.grid
    M = [pad_factor * n for n in grid.shape]
    big = np.zeros(M)
    start = [(m - n) // 2 for m, n in zip(M, grid.shape)]
    big[tuple(slice(st, st + n) for st, n in zip(start, grid.shape))] = u.values
    freqs = [2.0 * math.pi * np.fft.fftfreq(m, d=grid.h) for m in M]
    mesh = np.meshgrid(*freqs, indexing="ij")
    sym = sum(f * f for f in mesh) ** s
    w = np.real(np.fft.ifftn(np.fft.fftn(big) * sym))
    return u.norm(p) + float((np.sum(np.abs(w) ** p) * grid.h ** grid.dim) ** (1.0 / p))


# --------------------------------------------------------------------------
# regularity probe
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CutSpec:
    """Grid-independent description of a cut-off (rebuilt on every grid)."""

    label: str
    omega_tilde: Interval | Ball
    omega: Interval | Ball
    moll_radius: float

    def build(self, mask: DomainMask) -> CutoffPair:
        return build_cutoff(mask, self.omega_tilde, self.omega, self.moll_radius, self.label)


@dataclass
class RegularityReport:
    """Norm table, growth fits and per-cutoff blow-up thresholds.

    ``threshold[label]`` is None when no scanned order shows growth under
    refinement ("no threshold below ceiling").
    """

    p: float
    ceiling: float
    norms: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    stable: dict = field(default_factory=dict)
    threshold: dict = field(default_factory=dict)
    stable_threshold: dict = field(default_factory=dict)

    def verdict(self, label: str) -> str:
        t = self.threshold.get(label)
        return "no threshold below ceiling" if t is None else f"threshold {t:.3f}"

    def to_dict(self) -> dict:
        return {
            "p": self.p,
            "ceiling": self.ceiling,
            "norms": self.norms,
            "fits": {f"{k[0]}|{k[1]!r}": v.to_dict() for k, v in sorted(self.fits.items())},
            "stable": {f"{k[0]}|{k[1]!r}": v for k, v in sorted(self.stable.items())},
            "threshold": dict(sorted(self.threshold.items())),
            "stable_threshold": dict(sorted(self.stable_threshold.items())),
            "verdict": {k: self.verdict(k) for k in sorted(self.threshold)},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["kind", "sigma", "p", "q", "cutoff", "h", "value"])
        for r in self.norms:
            w.writerow([r["kind"], repr(r["sigma"]), repr(r["p"]), repr(r["q"]), r["cutoff"],
                        repr(r["h"]), repr(r["value"])])
        return buf.getvalue()

    def fit_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["log_h", "log_norm", "sigma", "p", "cutoff"])
        for r in self.norms:
            w.writerow([repr(math.log(r["h"])), repr(math.log(r["value"])) if r["value"] > 0 else "-inf",
                        repr(r["sigma"]), repr(r["p"]), r["cutoff"]])
        return buf.getvalue()


def _norm_for(f: GridFunction, sigma: float, p: float, s: float | None) -> tuple[str, float]:
    if s is not None and abs(sigma - 2.0 * s) < 1e-12:
        return "potential", potential_norm(f, s, p)
    if sigma < 1.0:
        return "gagliardo", sobolev_norm(f, sigma, p)
    return "besov2", besov_norm(f, sigma, p, p)


def local_regularity_probe(u, mask, p: float, cut_ladder: Sequence[CutSpec | None],
                           sigma_scan: Sequence[float], h_ladder: Sequence[float],
                           s: float | None = None, min_growth: float = 0.15,
                           stability_factor: float = 2.0) -> RegularityReport:
    """Scan norms of eta*u over orders and grids and locate the blow-up order.

    Args:
        u: callable ``h -> (GridFunction, DomainMask)`` or a list of grid
            functions aligned with ``h_ladder`` (then ``mask`` is a matching list).
        mask: ignored for callables.
        p: integrability exponent.
        cut_ladder: cut-off specs; ``None`` means no cut-off (global norm).
        sigma_scan: orders; sigma < 1 uses W^{sigma,p}, sigma >= 1 the
            second-difference B^sigma_{p,p}; sigma = 2s uses the potential norm
            when ``s`` is given.
        h_ladder: at least three grid spacings.

    For each (cut-off, sigma) the growth exponent gamma is the slope of
    log(norm) against log(1/h).  A norm that behaves like h^{sigma_c - sigma}
    gives sigma - gamma = sigma_c, so the threshold is the median of
    sigma - gamma over orders with gamma >= ``min_growth``.  The x2 stability
    verdict across refinements is reported alongside: ``stable_threshold`` is
    the largest scanned order whose norms stay within the factor.
    """
    h_ladder = list(h_ladder)
    if len(h_ladder) < 3:
        raise ValueError("at least three refinement levels are required")
    funcs = []
    for i, h in enumerate(h_ladder):
        if callable(u):
            funcs.append(u(h))
        else:
            funcs.append((u[i], mask[i]))
    report = RegularityReport(p=float(p), ceiling=float(max(sigma_scan)))
    for spec in cut_ladder:
        label = "global" if spec is None else spec.label
        growth = {}
        for sigma in sigma_scan:
            vals = []
            for h, (f, m) in zip(h_ladder, funcs):
                g = f if spec is None else (spec.build(m).eta * f).with_support()
                kind, val = _norm_for(g, float(sigma), p, s)
                vals.append(val)
                report.norms.append({"kind": kind, "sigma": float(sigma), "p": float(p), "q": float(p),
                                     "cutoff": label, "h": float(h), "value": float(val)})
            fit = linear_fit(-np.log(h_ladder), np.log(vals))
            report.fits[(label, float(sigma))] = fit
            report.stable[(label, float(sigma))] = bool(max(vals) / min(vals) < stability_factor)
            growth[float(sigma)] = fit.slope
        cands = [sg - gm for sg, gm in growth.items() if gm >= min_growth]
        report.threshold[label] = float(np.median(cands)) if cands else None
        stable = [sg for sg in growth if report.stable[(label, sg)]]
        report.stable_threshold[label] = max(stable) if stable else None
    return report


# --------------------------------------------------------------------------
# boundary behaviour
# --------------------------------------------------------------------------


def boundary_exponent_probe(u: GridFunction, mask: DomainMask, band: float | None = None,
                            inner_fraction: float = 0.25) -> LineFit:
    """Slope of log|u| against log rho over inside nodes with rho in [inner_fraction*band, band].

    The innermost nodes are excluded because the discrete solution carries a
    boundary layer a few cells thick.  ``band`` defaults to 16h and must be
    at least 4h.
    """
    h = mask.grid.h
    if band is None:
        band = 16.0 * h
    if band < 4.0 * h:
        raise ValueError("band must be at least 4h")
    rho = mask.rho
    sel = mask.inside & (rho <= band) & (rho >= inner_fraction * band) & (u.values != 0)
    if sel.sum() < 2:
        raise ValueError("empty boundary band")
    return linear_fit(np.log(rho[sel]), np.log(np.abs(u.values[sel])))


def _extrapolated_trace(rho: np.ndarray, vals: np.ndarray, s: float) -> float:
    """lim (u/rho^s)^2 at rho -> 0 from three samples.

    u^{1/s} is interpolated by a quadratic in rho and its slope c1 at the
    boundary gives u ~ (c1 rho)^s, so the limit is c1^{2s}.
    """
    w = np.abs(vals) ** (1.0 / s)
    coef = np.polyfit(rho, w, 2)
    c1 = coef[1]
    if not np.isfinite(c1) or c1 < 0:
        raise ArithmeticError("boundary extrapolation failed (negative slope)")
    return float(c1 ** (2.0 * s))


def pohozaev_residual(pair: EigenPair, mask: DomainMask, s: float, band: float | None = None,
                      n_angles: int = 256) -> tuple[float, float, float]:
    """Both sides of s*lambda*int u^2 = Gamma(1+s)^2/2 * int_boundary (u/rho^s)^2 (x.nu).

    The boundary trace (u/rho^s)^2 is extrapolated from three samples at
    distances band/2, band, 3*band/2 (band defaults to 16h).  1D masks must
    be a single interval; 2D masks must be a ball, sampled along
    ``n_angles`` rays with linear interpolation.  Returns (lhs, rhs, relative residual).
    """
    u = pair.vec
    grid = mask.grid
    h, N = grid.h, grid.dim
    if pair.residual > 1e-8 * max(1.0, abs(pair.lam)):
        raise ValueError("eigenpair residual too large for the Pohozaev check")
    lhs = s * pair.lam * float(np.sum(u.values ** 2)) * h ** N
    if band is None:
        band = 16.0 * h
    targets = np.array([0.5, 1.0, 1.5]) * band
    if targets[-1] >= float(mask.rho.max()):
        raise ValueError("extrapolation band too wide for the domain; refine the grid")
    pref = gamma(1.0 + s) ** 2 / 2.0
    shape = mask.shape
    if N == 1:
        if isinstance(shape, Ball):
            shape = Interval(shape.center[0] - shape.radius, shape.center[0] + shape.radius)
        if not isinstance(shape, Interval):
            raise ValueError("the Pohozaev check needs an interval in 1D")
        if shape.a >= 0 or shape.b <= 0:
            raise ValueError("interval is not star-shaped about the origin")
        x = grid.axis(0)
        rhs = 0.0
        if not np.any(u.values):
            return lhs, 0.0, 0.0
        for end, nu in ((shape.a, -1.0), (shape.b, 1.0)):
            rho = np.abs(x - end)
            side = mask.inside & ((x - end) * nu < 0)
            idx = [int(np.flatnonzero(side)[np.argmin(np.abs(rho[side] - t))]) for t in targets]
            rhs += _extrapolated_trace(rho[idx], u.values[idx], s) * end * nu
        rhs *= pref
    else:
        if not isinstance(shape, Ball):
            raise ValueError("the 2D Pohozaev check needs a disc mask")
        from scipy.interpolate import RegularGridInterpolator
        c = np.asarray(shape.center)
        R = shape.radius
        if np.linalg.norm(c) >= R:
            raise ValueError("disc is not star-shaped about the origin")
        if not np.any(u.values):
            return lhs, 0.0, 0.0
        interp = RegularGridInterpolator((grid.axis(0), grid.axis(1)), u.values)
        th = 2.0 * math.pi * np.arange(n_angles) / n_angles
        total = 0.0
        for t in th:
            nu = np.array([math.cos(t), math.sin(t)])
            pts = c + (R - targets)[:, None] * nu
            total += _extrapolated_trace(targets, interp(pts), s) * float((c + R * nu) @ nu)
        rhs = pref * total * R * 2.0 * math.pi / n_angles
    if lhs == 0.0 and rhs == 0.0:
        return 0.0, 0.0, 0.0
    return lhs, rhs, abs(lhs - rhs) / abs(lhs)
