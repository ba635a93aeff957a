"""Uniform grids, domain masks, cut-off functions and grid functions.

Everything downstream works on a uniform axis-aligned lattice in one or two
dimensions.  The open set enters only through a :class:`DomainMask` (inside
flags plus the distance ``rho`` to the boundary).  Functions live in
:class:`GridFunction`, which carries an optional support box so that the
nonlocal operators know the function vanishes outside it.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union as _U

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "Grid",
    "build_grid",
    "grid_for_box",
    "Interval",
    "Ball",
    "Union",
    "NodeList",
    "DomainMask",
    "make_domain",
    "GridFunction",
    "CutoffPair",
    "build_cutoff",
    "bump_cdf",
]

PADDING = 2


# --------------------------------------------------------------------------
# Grid
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Uniform lattice ``origin + i*h`` with ``extent[a]`` nodes along axis a."""

    dim: int
    h: float
    origin: tuple
    extent: tuple

    def __post_init__(self) -> None:
        if self.dim not in (1, 2):
            raise ValueError("only 1D and 2D grids are supported")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"grid spacing must be positive, got {self.h!r}")
        if len(self.origin) != self.dim or len(self.extent) != self.dim:
            raise ValueError("origin and extent must have one entry per axis")
        if any(int(n) < 3 for n in self.extent):
            raise ValueError("extent must be at least 3 per axis")

    @property
    def shape(self) -> tuple:
        return tuple(int(n) for n in self.extent)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def axis(self, a: int) -> np.ndarray:
        """Node coordinates along axis ``a``, each computed as origin + i*h."""
        return self.origin[a] + np.arange(self.shape[a]) * self.h

    def coords(self) -> list[np.ndarray]:
        """Coordinate arrays with the grid shape (``ij`` indexing)."""
        return list(np.meshgrid(*[self.axis(a) for a in range(self.dim)], indexing="ij"))

    def points(self) -> np.ndarray:
        """All node coordinates as an array of shape (size, dim), C order."""
        return np.stack([c.ravel() for c in self.coords()], axis=1)

    def node(self, index: Sequence[int]) -> tuple:
        return tuple(self.origin[a] + int(index[a]) * self.h for a in range(self.dim))

    @property
    def lower(self) -> np.ndarray:
        """Lower corner of the box covered by the node cells."""
        return np.asarray(self.origin, dtype=float) - 0.5 * self.h

    @property
    def upper(self) -> np.ndarray:
        return np.asarray([self.origin[a] + (self.shape[a] - 0.5) * self.h
                           for a in range(self.dim)])

    def boundary_nodes(self) -> np.ndarray:
        """Boolean array marking nodes on the outer layer of the box."""
        b = np.zeros(self.shape, dtype=bool)
        for a in range(self.dim):
            sl = [slice(None)] * self.dim
            sl[a] = 0
            b[tuple(sl)] = True
            sl[a] = -1
            b[tuple(sl)] = True
        return b

    def to_dict(self) -> dict:
        return {"dim": self.dim, "h": self.h, "origin": list(self.origin),
                "extent": list(self.shape)}

    @classmethod
    def from_dict(cls, d: dict) -> "Grid":
        return cls(int(d["dim"]), float(d["h"]), tuple(float(o) for o in d["origin"]),
                   tuple(int(n) for n in d["extent"]))


def build_grid(dim: int, origin, h: float, extent) -> Grid:
    """Build a :class:`Grid`; scalars are accepted for 1D origin/extent."""
    if np.isscalar(origin):
        origin = (origin,) * dim
    if np.isscalar(extent):
        extent = (extent,) * dim
    return Grid(int(dim), float(h), tuple(float(o) for o in origin),
                tuple(int(n) for n in extent))


def grid_for_box(dim: int, lo: float, hi: float, h: float) -> Grid:
    """Grid with nodes covering [lo, hi] on every axis (lo, hi multiples of h apart)."""
    n = int(round((hi - lo) / h)) + 1
    return build_grid(dim, lo, h, n)


# --------------------------------------------------------------------------
# Shapes
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Interval:
    """Open interval (a, b); a 1D shape."""

    a: float
    b: float

    def __post_init__(self) -> None:
        if not self.a < self.b:
            raise ValueError("interval needs a < b")

    dim = 1

    def contains(self, pts: np.ndarray) -> np.ndarray:
        x = pts[:, 0]
        return (x > self.a) & (x < self.b)

    def distance(self, pts: np.ndarray) -> np.ndarray:
        """Distance to the boundary (valid for points inside)."""
        x = pts[:, 0]
        return np.minimum(x - self.a, self.b - x)

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        """Negative inside, positive outside."""
        x = pts[:, 0]
        c, r = 0.5 * (self.a + self.b), 0.5 * (self.b - self.a)
        return np.abs(x - c) - r

    def dilate(self, d: float) -> "Interval":
        return Interval(self.a - d, self.b + d)

    def bbox(self) -> tuple:
        return (np.array([self.a]), np.array([self.b]))

    def inner_gap(self, outer: "Interval | Ball") -> float:
        """dist(self, complement of outer); negative if not nested."""
        lo, hi = outer.bbox()
        return min(self.a - lo[0], hi[0] - self.b)

    def to_dict(self) -> dict:
        return {"type": "interval", "a": self.a, "b": self.b}


@dataclass(frozen=True)
class Ball:
    """Open Euclidean ball; in 1D it coincides with an interval."""

    center: tuple
    radius: float

    def __post_init__(self) -> None:
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))

    @property
    def dim(self) -> int:
        return len(self.center)

    def _r(self, pts: np.ndarray) -> np.ndarray:
        return np.sqrt(np.sum((pts - np.asarray(self.center)) ** 2, axis=1))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return self._r(pts) < self.radius

    def distance(self, pts: np.ndarray) -> np.ndarray:
        return self.radius - self._r(pts)

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        return self._r(pts) - self.radius

    def dilate(self, d: float) -> "Ball":
        return Ball(self.center, self.radius + d)

    def bbox(self) -> tuple:
        c = np.asarray(self.center)
        return (c - self.radius, c + self.radius)

    def inner_gap(self, outer: "Interval | Ball") -> float:
        if isinstance(outer, Ball):
            off = float(np.linalg.norm(np.asarray(self.center) - np.asarray(outer.center)))
            return outer.radius - off - self.radius
        if self.dim != 1:
            raise TypeError("a 2D ball cannot be nested in an interval")
        return Interval(self.center[0] - self.radius, self.center[0] + self.radius).inner_gap(outer)

    def to_dict(self) -> dict:
        return {"type": "ball", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Union:
    """Union of interval/ball parts.

    ``distance`` takes the largest part distance, which is the exact distance
    to the boundary when the closures of the parts are disjoint.
    """

    parts: tuple

    def __post_init__(self) -> None:
        if not self.parts:
            raise ValueError("union needs at least one part")
        object.__setattr__(self, "parts", tuple(self.parts))

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return np.any([p.contains(pts) for p in self.parts], axis=0)

    def distance(self, pts: np.ndarray) -> np.ndarray:
        return np.max([p.distance(pts) for p in self.parts], axis=0)

    def signed_distance(self, pts: np.ndarray) -> np.ndarray:
        return np.min([p.signed_distance(pts) for p in self.parts], axis=0)

    def dilate(self, d: float) -> "Union":
        return Union(tuple(p.dilate(d) for p in self.parts))

    def bbox(self) -> tuple:
        los, his = zip(*[p.bbox() for p in self.parts])
        return (np.min(los, axis=0), np.max(his, axis=0))

    def to_dict(self) -> dict:
        return {"type": "union", "parts": [p.to_dict() for p in self.parts]}


@dataclass(frozen=True)
class NodeList:
    """Explicit set of inside nodes, given as index tuples."""

    indices: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "indices", tuple(tuple(int(i) for i in np.atleast_1d(ix))
                                                  for ix in self.indices))

    @property
    def dim(self) -> int:
        return len(self.indices[0]) if self.indices else 1

    def to_dict(self) -> dict:
        return {"type": "nodes", "indices": [list(ix) for ix in self.indices]}


Shape = _U[Interval, Ball, Union, NodeList]


def shape_from_dict(d: dict) -> Shape:
    kind = d["type"]
    if kind == "interval":
        return Interval(float(d["a"]), float(d["b"]))
    if kind == "ball":
        return Ball(tuple(d["center"]), float(d["radius"]))
    if kind == "union":
        return Union(tuple(shape_from_dict(p) for p in d["parts"]))
    if kind == "nodes":
        return NodeList(tuple(tuple(ix) for ix in d["indices"]))
    raise ValueError(f"unknown shape type {kind!r}")


# --------------------------------------------------------------------------
# Domain mask
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DomainMask:
    """Inside flags and boundary distance for an open set on a grid.

    ``rho_method`` is ``"analytic"`` for interval/ball/union shapes and
    ``"cell-face"`` for explicit node lists.
    """

    grid: Grid
    inside: np.ndarray
    rho: np.ndarray
    shape: Shape
    rho_method: str = "analytic"

    def __post_init__(self) -> None:
        for arr in (self.inside, self.rho):
            arr.setflags(write=False)

    @property
    def count(self) -> int:
        return int(self.inside.sum())

    def index_map(self) -> np.ndarray:
        """Flat (C-order) indices of inside nodes; row r of A_D is node index_map[r]."""
        return np.flatnonzero(self.inside.ravel())

    def bbox_indices(self) -> tuple:
        """Inclusive index bounding box of the inside set, as ((lo...), (hi...))."""
        idx = np.nonzero(self.inside)
        return (tuple(int(i.min()) for i in idx), tuple(int(i.max()) for i in idx))


def make_domain(grid: Grid, shape: Shape) -> DomainMask:
    """Rasterize ``shape`` on ``grid`` and compute the distance field rho."""
    if shape.dim != grid.dim:
        raise ValueError("shape and grid dimensions differ")
    if isinstance(shape, NodeList):
        inside = np.zeros(grid.shape, dtype=bool)
        for ix in shape.indices:
            if any(not (0 <= ix[a] < grid.shape[a]) for a in range(grid.dim)):
                raise ValueError(f"node {ix} lies outside the grid")
            inside[ix] = True
        _check_padding(grid, inside)
        rho = _cell_face_distance(grid, inside)
        return DomainMask(grid, inside, rho, shape, "cell-face")

    lo, hi = shape.bbox()
    first = np.asarray(grid.origin)
    last = np.asarray([grid.axis(a)[-1] for a in range(grid.dim)])
    if np.any(lo <= first) or np.any(hi >= last):
        raise ValueError("shape touches the grid box; at least 2 padding layers are required")
    pts = grid.points()
    inside = shape.contains(pts).reshape(grid.shape)
    _check_padding(grid, inside)
    rho = np.zeros(grid.size)
    flat = inside.ravel()
    rho[flat] = shape.distance(pts[flat])
    rho = rho.reshape(grid.shape)
    if np.any(rho[inside] <= 0):
        raise ValueError("inside node with nonpositive boundary distance")
    return DomainMask(grid, inside, rho, shape, "analytic")


def _check_padding(grid: Grid, inside: np.ndarray) -> None:
    if not inside.any():
        raise ValueError("domain has empty interior on this grid")
    for a in range(grid.dim):
        ix = np.nonzero(inside.any(axis=tuple(b for b in range(grid.dim) if b != a)))[0]
        if ix.min() < PADDING or ix.max() > grid.shape[a] - 1 - PADDING:
            raise ValueError("shape touches the grid box; at least 2 padding layers are required")


def _cell_face_distance(grid: Grid, inside: np.ndarray) -> np.ndarray:
    """Distance from inside nodes to the union of the cells of outside nodes."""
    pts = grid.points()
    flat = inside.ravel()
    pin, pout = pts[flat], pts[~flat]
    tree = cKDTree(pout)
    d0, _ = tree.query(pin)
    half = 0.5 * grid.h
    out = np.empty(len(pin))
    # The closest cell may belong to a non-nearest centre; every candidate
    # lies within d0 + (sqrt(dim)-1)*h/2 of the node.
    slack = (math.sqrt(grid.dim) - 1.0) * half + 1e-12 * grid.h
    for i, (p, r) in enumerate(zip(pin, d0)):
        cand = pout[tree.query_ball_point(p, r + slack)]
        gap = np.maximum(np.abs(cand - p) - half, 0.0)
        out[i] = np.sqrt(np.sum(gap * gap, axis=1)).min()
    rho = np.zeros(grid.size)
    rho[flat] = out
    return rho.reshape(grid.shape)


# --------------------------------------------------------------------------
# Grid functions
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Real values on the nodes of a grid, optionally with a support box.

    ``support`` is an inclusive index box ``((lo_0, ...), (hi_0, ...))``;
    values outside it are exactly zero.
    """

    grid: Grid
    values: np.ndarray
    support: tuple | None = None

    def __post_init__(self) -> None:
        v = np.array(self.values, dtype=float, copy=True).reshape(self.grid.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("grid function values must be finite")
        if self.support is not None:
            lo, hi = (tuple(int(i) for i in self.support[0]), tuple(int(i) for i in self.support[1]))
            object.__setattr__(self, "support", (lo, hi))
            keep = np.zeros(self.grid.shape, dtype=bool)
            keep[tuple(slice(lo[a], hi[a] + 1) for a in range(self.grid.dim))] = True
            if np.any(v[~keep] != 0.0):
                raise ValueError("values outside the declared support must be zero")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    # construction helpers ------------------------------------------------
    @classmethod
    def from_callable(cls, grid: Grid, fn, support: str | tuple | None = "auto") -> "GridFunction":
        """Sample ``fn(*coords)`` on the grid.

        ``support="auto"`` declares the index bounding box of the nonzero values.
        """
        vals = np.asarray(fn(*grid.coords()), dtype=float) * np.ones(grid.shape)
        if isinstance(support, str):
            support = _nonzero_box(vals)
        return cls(grid, vals, support)

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFunction":
        return cls(grid, np.zeros(grid.shape), ((0,) * grid.dim, (0,) * grid.dim))

    def with_support(self, support: str | tuple | None = "auto") -> "GridFunction":
        if isinstance(support, str):
            support = _nonzero_box(self.values)
        return GridFunction(self.grid, self.values, support)

    @property
    def full_support(self) -> tuple:
        return ((0,) * self.grid.dim, tuple(n - 1 for n in self.grid.shape))

    # arithmetic ------------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise ValueError("grid functions live on different grids")
            return other.values, other.support
        return float(other), None

    def __add__(self, other) -> "GridFunction":
        ov, osup = self._coerce(other)
        sup = _box_union(self.support, osup) if isinstance(other, GridFunction) else (
            self.support if ov == 0.0 else None)
        return GridFunction(self.grid, self.values + ov, sup)

    __radd__ = __add__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.grid, -self.values, self.support)

    def __sub__(self, other) -> "GridFunction":
        return self + (-other)

    def __rsub__(self, other) -> "GridFunction":
        return (-self) + other

    def __mul__(self, other) -> "GridFunction":
        ov, osup = self._coerce(other)
        if isinstance(other, GridFunction):
            sup = _box_intersection(self.support, osup)
        else:
            sup = self.support
        vals = self.values * ov
        if sup is not None and _box_empty(sup):
            return GridFunction(self.grid, np.zeros(self.grid.shape), ((0,) * self.grid.dim,) * 2)
        return GridFunction(self.grid, vals, sup)

    __rmul__ = __mul__

    # norms ----------------------------------------------------------------
    def norm(self, p: float = 2.0) -> float:
        """Discrete L^p norm (sum |u|^p h^N)^(1/p); p may be inf."""
        if math.isinf(p):
            return float(np.abs(self.values).max())
        return float((np.sum(np.abs(self.values) ** p) * self.grid.h ** self.grid.dim) ** (1.0 / p))

    def integral(self) -> float:
        return float(self.values.sum() * self.grid.h ** self.grid.dim)

    # serialization -----------------------------------------------------------
    def metadata(self) -> dict:
        d = self.grid.to_dict()
        d["support"] = None if self.support is None else [list(self.support[0]), list(self.support[1])]
        return d

    def to_csv(self, path: str | Path) -> tuple[Path, Path]:
        """Write ``index,coord...,value`` rows plus a sidecar ``.json`` metadata file."""
        path = Path(path)
        names = ["x", "y"][: self.grid.dim]
        pts = self.grid.points()
        with open(path, "w", newline="") as fh:
            fh.write(",".join(["index", *names, "value"]) + "\n")
            for i, (p, v) in enumerate(zip(pts, self.values.ravel())):
                fh.write(",".join([str(i), *(repr(float(c)) for c in p), repr(float(v))]) + "\n")
        meta = path.with_suffix(".json")
        meta.write_text(json.dumps(self.metadata(), sort_keys=True, indent=2) + "\n")
        return path, meta

    @classmethod
    def read_csv(cls, path: str | Path) -> "GridFunction":
        path = Path(path)
        meta = json.loads(path.with_suffix(".json").read_text())
        grid = Grid.from_dict(meta)
        vals = np.empty(grid.size)
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            next(reader)
            for row in reader:
                vals[int(row[0])] = float(row[-1])
        sup = meta.get("support")
        sup = None if sup is None else (tuple(sup[0]), tuple(sup[1]))
        return cls(grid, vals.reshape(grid.shape), sup)


def _nonzero_box(vals: np.ndarray) -> tuple:
    nz = np.nonzero(vals)
    if len(nz[0]) == 0:
        return ((0,) * vals.ndim, (0,) * vals.ndim)
    return (tuple(int(i.min()) for i in nz), tuple(int(i.max()) for i in nz))


def _box_union(a, b):
    if a is None or b is None:
        return None
    return (tuple(min(x, y) for x, y in zip(a[0], b[0])), tuple(max(x, y) for x, y in zip(a[1], b[1])))


def _box_intersection(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return (tuple(max(x, y) for x, y in zip(a[0], b[0])), tuple(min(x, y) for x, y in zip(a[1], b[1])))


def _box_empty(box) -> bool:
    return any(lo > hi for lo, hi in zip(*box))


# --------------------------------------------------------------------------
# Cut-off functions
# --------------------------------------------------------------------------

_GL_X, _GL_W = np.polynomial.legendre.leggauss(80)


def _bump(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    m = np.abs(t) < 1.0
    out[m] = np.exp(-1.0 / (1.0 - t[m] ** 2))
    return out


_BUMP_MASS = float(np.sum(_GL_W * _bump(_GL_X)))


def bump_cdf(t: np.ndarray) -> np.ndarray:
    """CDF of the normalized standard bump exp(-1/(1-t^2)) on (-1,1)."""
    t = np.clip(np.asarray(t, dtype=float), -1.0, 1.0)
    half = 0.5 * (t + 1.0)
    nodes = -1.0 + half[..., None] * (_GL_X + 1.0)
    return np.sum(_GL_W * _bump(nodes), axis=-1) * half / _BUMP_MASS


def bump_density(t: np.ndarray) -> np.ndarray:
    """Normalized bump density (unit mass on (-1,1))."""
    return _bump(t) / _BUMP_MASS


@dataclass(frozen=True, eq=False)
class CutoffPair:
    """Smooth cut-off eta with eta = 1 on omega_tilde and eta = 0 outside omega.

    ``omega_tilde`` and ``omega`` are boolean node sets; the shapes they came
    from are kept for reporting.  ``degenerate`` marks the test-mode cut-off
    eta = 1 on the whole box, which skips nesting checks.
    """

    eta: GridFunction
    omega_tilde: np.ndarray
    omega: np.ndarray
    moll_radius: float
    shapes: tuple = ()
    degenerate: bool = False
    label: str = "cut"

    @classmethod
    def constant(cls, grid: Grid, label: str = "const") -> "CutoffPair":
        ones = np.ones(grid.shape, dtype=bool)
        return cls(GridFunction(grid, np.ones(grid.shape), None), ones, ones, 0.0,
                   (), True, label)


def _boundary_samples(shape: Interval | Ball, n: int = 720) -> np.ndarray:
    """Points on the boundary of an interval or ball (endpoints / circle samples)."""
    if isinstance(shape, Interval):
        return np.array([[shape.a], [shape.b]])
    c = np.asarray(shape.center, dtype=float)
    if c.size == 1:
        return np.array([[c[0] - shape.radius], [c[0] + shape.radius]])
    th = 2.0 * np.pi * np.arange(n) / n
    return c + shape.radius * np.stack([np.cos(th), np.sin(th)], axis=1)


def build_cutoff(mask: DomainMask, omega_tilde: Interval | Ball, omega: Interval | Ball,
                 moll_radius: float, label: str = "cut") -> CutoffPair:
    """Mollified indicator: plateau on omega_tilde, support inside omega.

    The indicator of omega_tilde dilated by half the gap to the boundary of
    omega is smoothed with a bump of radius ``moll_radius``.  A plateau and a
    vanishing region with these exact sets need ``2*moll_radius <= gap``.
    In 1D the sampled values are the exact convolution; for balls the same
    one-dimensional transition profile is applied to the signed distance.
    """
    grid = mask.grid
    h = grid.h
    if moll_radius < 2.0 * h:
        raise ValueError(f"moll_radius {moll_radius} < 2h: cut-off unresolved at this grid")
    gap = omega_tilde.inner_gap(omega)
    if gap < 2.0 * moll_radius - 1e-12:
        raise ValueError(f"insufficient separation between omega_tilde and omega: gap {gap}, "
                         f"need at least 2*moll_radius = {2 * moll_radius}")
    pts = grid.points()
    sd_outer = omega.signed_distance(pts)
    # omega must sit strictly inside the domain
    if isinstance(mask.shape, NodeList):
        outer_in = omega.contains(pts) | (sd_outer <= 0)
        if np.any(outer_in & ~mask.inside.ravel()):
            raise ValueError("omega is not contained in the domain")
    else:
        if np.any(mask.shape.signed_distance(_boundary_samples(omega)) >= 0) or np.any(
                omega.contains(pts) & ~mask.inside.ravel()):
            raise ValueError("omega is not compactly contained in the domain")
    dil = omega_tilde.dilate(0.5 * gap)
    sd = dil.signed_distance(pts)
    if isinstance(dil, Interval) or (isinstance(dil, Ball) and dil.dim == 1):
        lo, hi = dil.bbox()
        x = pts[:, 0]
        vals = bump_cdf((x - lo[0]) / moll_radius) - bump_cdf((x - hi[0]) / moll_radius)
    else:
        vals = 1.0 - bump_cdf(sd / moll_radius)
    vals = np.where(sd <= -moll_radius, 1.0, np.where(sd >= moll_radius, 0.0, vals))
    vals = np.clip(vals, 0.0, 1.0).reshape(grid.shape)
    wt = omega_tilde.contains(pts).reshape(grid.shape)
    w = omega.contains(pts).reshape(grid.shape)
    eta = GridFunction(grid, vals, _nonzero_box(vals))
    return CutoffPair(eta, wt, w, float(moll_radius), (omega_tilde, omega), False, label)
