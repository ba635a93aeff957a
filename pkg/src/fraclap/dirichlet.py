"""The Dirichlet realization A_D of the fractional Laplacian on a mask.

Rows of A_D reproduce :func:`fraclap.fracop.apply_fl_integral` for grid
functions that vanish off the mask, so the nonlocal exterior condition holds
on the rest of the box and, through the analytic tail, beyond it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, cg

from ._fit import LineFit, linear_fit
from .fracop import (FracParams, convolve_box, discrete_laplacian, exterior_tail, kernel_table,
                     lattice_moment_constant)
from .grid import DomainMask, GridFunction

__all__ = [
    "DirichletOperator",
    "EigenPair",
    "SolveReport",
    "assemble_dirichlet",
    "solve_dirichlet",
    "bilinear_energy",
    "eigen_dirichlet",
    "semigroup_solve",
    "ultracontractivity_probe",
    "ultracontractive_times",
]

DENSE_LIMIT = 4096


@dataclass(eq=False)
class DirichletOperator:
    """Symmetric matrix (dense array or matrix-free operator) for A_D.

    ``index_map[r]`` is the flat grid index of the node behind row ``r``.
    ``tail_diag`` holds C_{N,s} times the exterior-box tail for each row.
    """

    mask: DomainMask
    params: FracParams
    index_map: np.ndarray
    matrix: np.ndarray | LinearOperator
    tail_diag: np.ndarray
    diag: np.ndarray
    _apply: object = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def s(self) -> float:
        return self.params.s

    @property
    def size(self) -> int:
        return int(self.index_map.size)

    @property
    def dense(self) -> bool:
        return isinstance(self.matrix, np.ndarray)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        if self.dense:
            return self.matrix @ v
        return self._apply(v)

    def restrict(self, f: GridFunction) -> np.ndarray:
        """Values of ``f`` on the interior nodes, in row order."""
        if f.grid != self.mask.grid:
            raise ValueError("grid function lives on a different grid")
        return f.values.ravel()[self.index_map].copy()

    def extend(self, vec: np.ndarray) -> GridFunction:
        """Grid function equal to ``vec`` on interior nodes and zero elsewhere."""
        grid = self.mask.grid
        full = np.zeros(grid.size)
        full[self.index_map] = vec
        return GridFunction(grid, full.reshape(grid.shape), self.mask.bbox_indices())

    # cached factorizations -------------------------------------------------
    def cholesky(self):
        if "chol" not in self._cache:
            try:
                self._cache["chol"] = sla.cho_factor(self.matrix, lower=True, check_finite=False)
            except sla.LinAlgError as exc:
                raise np.linalg.LinAlgError(
                    "A_D is not positive definite; this indicates an assembly error") from exc
        return self._cache["chol"]

    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Full eigendecomposition (dense operators only), cached."""
        if not self.dense:
            raise ValueError("full spectrum is only available for dense operators")
        if "eigh" not in self._cache:
            self._cache["eigh"] = sla.eigh(self.matrix, check_finite=False)
        return self._cache["eigh"]

    def export_matrix_market(self, path: str | Path) -> Path:
        """Write the dense matrix in Matrix Market array format."""
        if not self.dense:
            raise ValueError("matrix-free operators cannot be exported")
        path = Path(path)
        scipy.io.mmwrite(str(path), self.matrix, comment="fractional Laplacian, Dirichlet realization",
                         symmetry="symmetric")
        return path if path.suffix == ".mtx" else path.with_name(path.name + ".mtx")

    def report(self) -> dict:
        d = {"interior_nodes": self.size, "s": self.s, "N": self.params.N,
             "h": self.mask.grid.h, "dense": self.dense}
        if self.dense:
            d["max_asymmetry"] = float(np.abs(self.matrix - self.matrix.T).max())
        return d


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalue ``lam`` (the lambda of the pair), unit-norm vector and residual."""

    lam: float
    vec: GridFunction
    residual: float

    @property
    def eigenvalue(self) -> float:
        return self.lam


@dataclass
class SolveReport:
    relative_residual: float = 0.0
    method: str = ""
    truncation_indicator: float | None = None
    spectral_bound: float | None = None
    iterations: int | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


# --------------------------------------------------------------------------
# assembly
# --------------------------------------------------------------------------


def assemble_dirichlet(mask: DomainMask, params: FracParams, dense_limit: int = DENSE_LIMIT
                       ) -> DirichletOperator:
    """Assemble A_D on the interior nodes of ``mask``.

    Off-diagonal entries are -C h^N/|x-y|^{N+2s} (plus the nearest-neighbour
    part of the singular-cell stencil); the diagonal collects the kernel over
    every other box node, the singular-cell value and the exterior-box tail.
    Above ``dense_limit`` interior nodes the operator is applied matrix-free.
    """
    grid = mask.grid
    if grid.dim != params.N:
        raise ValueError("grid dimension and params.N differ")
    if np.any(mask.inside & grid.boundary_nodes()):
        raise ValueError("mask without padding")
    s, C, h, N = params.s, params.c_ns, grid.h, grid.dim
    index_map = mask.index_map()
    m = index_map.size
    table = kernel_table(grid, 2.0 * s)
    row = convolve_box(np.ones(grid.shape), table).ravel()[index_map]
    tail = exterior_tail(grid, 2.0 * s).ravel()[index_map]
    K = lattice_moment_constant(N, s, h)
    nb = 0.5 * K / (h * h)
    diag = C * (row + tail + 2.0 * N * nb)
    tail_diag = C * tail

    if m > dense_limit:
        inside = mask.inside

        def apply(v: np.ndarray) -> np.ndarray:
            full = np.zeros(grid.size)
            full[index_map] = v
            full = full.reshape(grid.shape)
            sing = -0.5 * K * discrete_laplacian(full, h)
            out = -C * convolve_box(full, table) + C * sing
            return out.ravel()[index_map] + (diag - C * 2.0 * N * nb) * v

        op = LinearOperator((m, m), matvec=apply, rmatvec=apply, dtype=float)
        return DirichletOperator(mask, params, index_map, op, tail_diag, diag, apply)

    sub = np.array(np.unravel_index(index_map, grid.shape), dtype=np.int64)
    offs = [sub[a][:, None] - sub[a][None, :] + (grid.shape[a] - 1) for a in range(N)]
    M = -C * table[tuple(offs)]
    del offs
    pos = -np.ones(grid.size, dtype=np.int64)
    pos[index_map] = np.arange(m)
    for a in range(N):
        for step in (-1, 1):
            nbr = sub.copy()
            nbr[a] += step
            flat = np.ravel_multi_index(tuple(nbr), grid.shape)
            j = pos[flat]
            ok = j >= 0
            M[np.arange(m)[ok], j[ok]] -= C * nb
    M[np.diag_indices(m)] = diag
    return DirichletOperator(mask, params, index_map, M, tail_diag, diag, None)


# --------------------------------------------------------------------------
# solves
# --------------------------------------------------------------------------


def _cg(op: DirichletOperator, b: np.ndarray, shift: float = 0.0, scale: float = 1.0,
        rtol: float = 1e-12) -> tuple[np.ndarray, int]:
    """CG for (shift I + scale A) x = b with a Jacobi preconditioner."""
    m = op.size
    d = shift + scale * op.diag
    A = LinearOperator((m, m), matvec=lambda v: shift * v + scale * op.matvec(v), dtype=float)
    P = LinearOperator((m, m), matvec=lambda v: v / d, dtype=float)
    count = [0]

    def cb(_):
        count[0] += 1

    x, info = cg(A, b, rtol=rtol, atol=0.0, M=P, maxiter=20 * m, callback=cb)
    if info != 0:
        raise RuntimeError(f"CG did not converge (info={info})")
    return x, count[0]


def solve_dirichlet(op: DirichletOperator, f: GridFunction, report: SolveReport | None = None
                    ) -> GridFunction:
    """Solve A_D u = f on the interior nodes; u = 0 elsewhere."""
    b = op.restrict(f)
    if not np.all(np.isfinite(b)):
        raise ValueError("right-hand side must be finite on interior nodes")
    if op.dense:
        x = sla.cho_solve(op.cholesky(), b, check_finite=False)
        method, its = "cholesky", None
    else:
        x, its = _cg(op, b)
        method = "cg"
    nb = np.linalg.norm(b)
    res = float(np.linalg.norm(op.matvec(x) - b) / nb) if nb > 0 else 0.0
    if report is not None:
        report.relative_residual, report.method, report.iterations = res, method, its
    return op.extend(x)


def bilinear_energy(u: GridFunction, v: GridFunction, params: FracParams) -> float:
    """Discrete energy form E(u,v), consistent with the assembled A_D.

    Equals (C/2) sum_{x != y} (u(x)-u(y))(v(x)-v(y)) h^{2N}/|x-y|^{N+2s} over box
    nodes plus the exterior-tail term sum u v tail h^N and the singular-cell
    term (C K/2) sum over lattice edges of the difference products h^{N-2}.
    The value is symmetrized so that E(u,v) == E(v,u) bit for bit.
    """
    if u.grid != v.grid:
        raise ValueError("grid functions live on different grids")
    grid = u.grid
    s, C, h, N = params.s, params.c_ns, grid.h, grid.dim
    table = kernel_table(grid, 2.0 * s)
    row = convolve_box(np.ones(grid.shape), table) + exterior_tail(grid, 2.0 * s)
    K = lattice_moment_constant(N, s, h)

    def half(a: np.ndarray, b: np.ndarray) -> float:
        La = row * a - convolve_box(a, table) - 0.5 * K * discrete_laplacian(a, h)
        return float(np.sum(b * La))

    hn = h ** N
    return 0.5 * C * hn * (half(u.values, v.values) + half(v.values, u.values))


def _normalize(vec: np.ndarray, hn: float) -> np.ndarray:
    vec = vec / math.sqrt(np.sum(vec * vec) * hn)
    return vec if vec.sum() >= 0 else -vec


def eigen_dirichlet(op: DirichletOperator, k: int = 1, tol: float = 1e-9, max_iter: int = 500
                    ) -> list[EigenPair]:
    """The ``k`` smallest eigenpairs, ascending, with discrete unit L^2 norm.

    ``residual`` is the discrete L^2 norm of A v - lambda v.  Dense operators use
    a symmetric eigensolver; matrix-free ones use inverse iteration with
    deflation against the pairs already found.
    """
    if not 1 <= k <= op.size:
        raise ValueError("k must be between 1 and the number of interior nodes")
    hn = op.mask.grid.h ** op.params.N
    vals, vecs = [], []
    if op.dense:
        w, V = sla.eigh(op.matrix, subset_by_index=[0, k - 1], check_finite=False)
        vals, vecs = list(w), [V[:, i] for i in range(k)]
    else:
        rng = np.random.default_rng(12345)
        for i in range(k):
            v = rng.standard_normal(op.size)
            lam = 0.0
            for _ in range(max_iter):
                for q in vecs:
                    v = v - (q @ v) * q
                v = v / np.linalg.norm(v)
                Av = op.matvec(v)
                lam = float(v @ Av)
                if np.linalg.norm(Av - lam * v) <= tol * max(1.0, abs(lam)):
                    break
                v, _ = _cg(op, v, rtol=1e-13)
            else:
                raise RuntimeError(f"inverse iteration did not converge for eigenpair {i}")
            vals.append(lam)
            vecs.append(v / np.linalg.norm(v))
    pairs = []
    for lam, v in zip(vals, vecs):
        v = _normalize(np.asarray(v), hn)
        res = math.sqrt(float(np.sum((op.matvec(v) - lam * v) ** 2)) * hn)
        if res > tol * max(1.0, abs(lam)):
            raise RuntimeError(f"eigenpair residual {res} exceeds tolerance")
        pairs.append(EigenPair(float(lam), op.extend(v), res))
    return pairs


def semigroup_solve(op: DirichletOperator, f: GridFunction, T_max: float, n_steps: int = 24,
                    first_step: float | None = None, threshold: float = 1e-3,
                    report: SolveReport | None = None) -> GridFunction:
    """u = int_0^T e^{-t A_D} f dt with implicit steps on a geometric time ladder.

    Implicit Euler steps y_{k+1} = (I + dt_k A)^{-1} y_k combined with the
    right-endpoint rule telescope exactly: sum dt_k y_{k+1} = A^{-1}(f - y_n).
    Hence the only error is the truncation remainder y_n, whose relative size
    is reported (and must stay below ``threshold``).  Since (1+z)^{-1} >= e^{-z},
    the remainder is bounded by prod_k (1 + dt_k lambda_1)^{-1} rather than by
    e^{-lambda_1 T}; that product is reported as ``spectral_bound`` when the
    spectrum is available.
    """
    if n_steps < 1 or T_max <= 0:
        raise ValueError("need n_steps >= 1 and T_max > 0")
    b = op.restrict(f)
    nb = np.linalg.norm(b)
    if nb == 0:
        return op.extend(np.zeros(op.size))
    if first_step is None:
        first_step = T_max * 1e-6
    times = np.geomspace(first_step, T_max, n_steps)
    steps = np.diff(np.concatenate([[0.0], times]))
    y = b.copy()
    acc = np.zeros_like(b)
    eye = np.eye(op.size) if op.dense else None
    for dt in steps:
        if op.dense:
            fac = sla.cho_factor(eye + dt * op.matrix, lower=True, check_finite=False)
            y = sla.cho_solve(fac, y, check_finite=False)
        else:
            y, _ = _cg(op, y, shift=1.0, scale=dt, rtol=1e-10)
        acc += dt * y
    indicator = float(np.linalg.norm(y) / nb)
    bound = None
    if op.dense:
        lam1 = float(sla.eigh(op.matrix, subset_by_index=[0, 0], eigvals_only=True)[0])
        bound = float(np.prod(1.0 / (1.0 + steps * lam1)))
    if report is not None:
        report.method = "implicit-ladder"
        report.truncation_indicator = indicator
        report.spectral_bound = bound
        report.relative_residual = float(np.linalg.norm(op.matvec(acc) - (b - y)) / nb)
    if indicator > threshold:
        raise RuntimeError(f"truncation indicator {indicator:.3e} above threshold {threshold:.1e}; "
                           "increase T_max")
    return op.extend(acc)


# --------------------------------------------------------------------------
# ultracontractivity
# --------------------------------------------------------------------------


def semigroup_apply(op: DirichletOperator, f: GridFunction, t: float) -> np.ndarray:
    """e^{-t A_D} f on interior nodes (row order)."""
    b = op.restrict(f)
    if op.dense:
        lam, V = op.spectrum()
        return V @ (np.exp(-lam * t) * (V.T @ b))
    from scipy.sparse.linalg import expm_multiply
    return expm_multiply(-t * op.matrix, b, traceA=-t * float(op.diag.sum()))


def ultracontractive_times(op: DirichletOperator, n: int = 12, lo_nodes: float = 8.0,
                           hi_fraction: float = 0.1) -> np.ndarray:
    """Times whose diffusion length t^{1/(2s)} spans [lo_nodes*h, hi_fraction*inradius]."""
    h, s = op.mask.grid.h, op.s
    r = float(op.mask.rho.max())
    lo, hi = (lo_nodes * h) ** (2 * s), (hi_fraction * r) ** (2 * s)
    if not lo < hi:
        raise ValueError("grid too coarse for a small-time window")
    return np.geomspace(lo, hi, n)


def ultracontractivity_probe(op: DirichletOperator, f: GridFunction, times) -> LineFit:
    """Fit log ||e^{-tA}f||_inf - log ||f||_1 against log t; returns the fit."""
    times = np.asarray(times, dtype=float)
    h, N = op.mask.grid.h, op.params.N
    if times.min() < h * h:
        raise ValueError("time window outside the resolved regime (t < h^2)")
    b = op.restrict(f)
    if np.any(b < 0) or not np.any(b > 0):
        raise ValueError("f must be nonnegative and nonzero")
    l1 = float(np.sum(b) * h ** N)
    y = [math.log(float(np.abs(semigroup_apply(op, f, t)).max())) - math.log(l1) for t in times]
    return linear_fit(np.log(times), y)
