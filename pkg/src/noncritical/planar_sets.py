"""Closed planar sets as unions of shape primitives, with a raster view.

Points of the plane are Python/numpy complex numbers.  A :class:`Region` is a
finite union of shapes living on a bounded window; every region carries the
grid spacing ``h`` at which its raster (and every topological verdict derived
from it) is computed.

Raster convention: a cell belongs to the raster of a set iff the cell center
lies within half a cell diagonal of the set.  Isolated points are the one
exception; a point marks exactly the cell containing it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyRegionError, GeometryError

SQRT_HALF = math.sqrt(0.5)


def as_points(z) -> np.ndarray:
    """Coerce to a 1-D complex array, rejecting NaN and infinities."""
    arr = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    if not np.all(np.isfinite(arr)):
        raise GeometryError("points must have finite coordinates")
    return arr


def _segment_distance(z: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each z to the nearest of the segments [a_k, b_k]."""
    z = z[:, None]
    d = (b - a)[None, :]
    len2 = np.abs(d) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(len2 > 0, ((z - a[None, :]) * np.conj(d)).real / len2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    return np.abs(z - (a[None, :] + t * d)).min(axis=1)


def _segments_distance_chunked(z: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if len(a) == 0:
        return np.full(len(z), np.inf)
    if len(a) > 64 and len(z) > 64:
        return _segments_distance_pruned(z, a, b)
    return _segments_distance_full(z, a, b)


def _segments_distance_full(z, a, b):
    out = np.empty(len(z))
    chunk = max(1, 4_000_000 // max(len(a), 1))
    for s in range(0, len(z), chunk):
        out[s:s + chunk] = _segment_distance(z[s:s + chunk], a, b)
    return out


def _segments_distance_pruned(z, a, b, k: int = 12):
    """Exact distance using the k segments with the nearest midpoints.

    A point whose k-th midpoint is farther than (best + half the longest
    segment) is certified; the rest fall back to the full scan.
    """
    mid = (a + b) / 2
    half = float(np.abs(b - a).max()) / 2
    tree = cKDTree(np.column_stack([mid.real, mid.imag]))
    k = min(k, len(a))
    dk, idx = tree.query(np.column_stack([z.real, z.imag]), k=k)
    zc = z[:, None]
    aa, bb = a[idx], b[idx]
    d = bb - aa
    len2 = np.abs(d) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(len2 > 0, ((zc - aa) * np.conj(d)).real / len2, 0.0)
    t = np.clip(t, 0.0, 1.0)
    best = np.abs(zc - (aa + t * d)).min(axis=1)
    bad = dk[:, -1] - half < best
    if bad.any() and k < len(a):
        best[bad] = _segments_distance_full(z[bad], a, b)
    return best


def _cross(u, v):
    return u.real * v.imag - u.imag * v.real


def _segment_pair_distance(a1, b1, a2, b2) -> float:
    """Exact minimum distance between two families of segments."""
    if len(a1) == 0 or len(a2) == 0:
        return math.inf
    best = math.inf
    chunk = max(1, 2_000_000 // len(a2))
    for s in range(0, len(a1), chunk):
        p, q = a1[s:s + chunk, None], b1[s:s + chunk, None]
        r, t = a2[None, :], b2[None, :]
        d1, d2 = q - p, t - r
        o1 = _cross(d1, r - p)
        o2 = _cross(d1, t - p)
        o3 = _cross(d2, p - r)
        o4 = _cross(d2, q - r)
        crossing = (o1 * o2 <= 0) & (o3 * o4 <= 0)
        if np.any(crossing & ((o1 != 0) | (o2 != 0) | (o3 != 0) | (o4 != 0))):
            return 0.0
        best = min(best,
                   _segment_distance(a1[s:s + chunk], a2, b2).min(),
                   _segment_distance(b1[s:s + chunk], a2, b2).min(),
                   _segment_distance(a2, a1[s:s + chunk], b1[s:s + chunk]).min(),
                   _segment_distance(b2, a1[s:s + chunk], b1[s:s + chunk]).min())
    return float(best)


def _points_in_polygon(z: np.ndarray, verts: np.ndarray) -> np.ndarray:
    """Even-odd crossing test (boundary points are handled by the caller)."""
    inside = np.zeros(len(z), dtype=bool)
    x, y = z.real, z.imag
    vx, vy = verts.real, verts.imag
    n = len(verts)
    for k in range(n):
        x1, y1 = vx[k], vy[k]
        x2, y2 = vx[(k + 1) % n], vy[(k + 1) % n]
        cond = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        inside ^= cond & (x < xc)
    return inside


def _circle_points(center: complex, radius: float, step: float) -> np.ndarray:
    n = max(8, int(math.ceil(2 * math.pi * radius / step)))
    return center + radius * np.exp(2j * np.pi * np.arange(n) / n)


def _resample_path(vertices: np.ndarray, step: float, closed: bool) -> np.ndarray:
    v = np.append(vertices, vertices[:1]) if closed else vertices
    if len(v) == 1:
        return v.copy()
    out = []
    for a, b in zip(v[:-1], v[1:]):
        n = max(1, int(math.ceil(abs(b - a) / step)))
        out.append(a + (b - a) * np.arange(n) / n)
    if not closed:
        out.append(v[-1:])
    return np.concatenate(out)


def _lattice(bbox, step: float) -> np.ndarray:
    x0, y0, x1, y1 = bbox
    xs = np.arange(x0 + step / 2, x1, step) if x1 - x0 > step else np.array([(x0 + x1) / 2])
    ys = np.arange(y0 + step / 2, y1, step) if y1 - y0 > step else np.array([(y0 + y1) / 2])
    X, Y = np.meshgrid(xs, ys)
    return (X + 1j * Y).ravel()


# ---------------------------------------------------------------------------
# Grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Grid:
    """Boolean raster on a window.  ``mask[j, i]`` is the cell whose center is
    ``origin + ((i + 0.5) + 1j * (j + 0.5)) * spacing``."""

    mask: np.ndarray
    window: tuple
    spacing: float

    @property
    def origin(self) -> complex:
        return complex(self.window[0], self.window[1])

    @property
    def shape(self):
        return self.mask.shape

    def centers(self) -> np.ndarray:
        return grid_centers(self.window, self.spacing)

    def cell_centers(self, mask=None) -> np.ndarray:
        m = self.mask if mask is None else mask
        j, i = np.nonzero(m)
        return self.origin + ((i + 0.5) + 1j * (j + 0.5)) * self.spacing

    def with_mask(self, mask) -> "Grid":
        return Grid(np.asarray(mask, dtype=bool), self.window, self.spacing)

    def to_csv(self) -> str:
        rows = self.mask[::-1].astype(int)
        return "\n".join(",".join(map(str, r)) for r in rows) + "\n"

    def to_pgm(self) -> bytes:
        ny, nx = self.mask.shape
        body = np.where(self.mask[::-1], 0, 255).astype(np.uint8).tobytes()
        return f"P5\n{nx} {ny}\n255\n".encode() + body


def grid_shape(window, h) -> tuple[int, int]:
    x0, y0, x1, y1 = window
    nx = int(math.ceil((x1 - x0) / h - 1e-9))
    ny = int(math.ceil((y1 - y0) / h - 1e-9))
    return ny, nx


def grid_centers(window, h) -> np.ndarray:
    ny, nx = grid_shape(window, h)
    xs = window[0] + (np.arange(nx) + 0.5) * h
    ys = window[1] + (np.arange(ny) + 0.5) * h
    return xs[None, :] + 1j * ys[:, None]


def _index_box(window, h, bbox, pad, shape):
    """Index slices of the cells whose centers may lie within ``pad`` of bbox."""
    ny, nx = shape
    x0, y0, _, _ = window
    i0 = max(0, int(math.floor((bbox[0] - pad - x0) / h - 0.5)))
    i1 = min(nx, int(math.ceil((bbox[2] + pad - x0) / h + 0.5)) + 1)
    j0 = max(0, int(math.floor((bbox[1] - pad - y0) / h - 0.5)))
    j1 = min(ny, int(math.ceil((bbox[3] + pad - y0) / h + 0.5)) + 1)
    return slice(j0, max(j0, j1)), slice(i0, max(i0, i1))


def _patch_centers(window, h, sl):
    js, is_ = sl
    xs = window[0] + (np.arange(is_.start, is_.stop) + 0.5) * h
    ys = window[1] + (np.arange(js.start, js.stop) + 0.5) * h
    return xs[None, :] + 1j * ys[:, None]


# ---------------------------------------------------------------------------
# Shapes
# ---------------------------------------------------------------------------


class Shape:
    """Common interface of the shape primitives.

    ``distance`` is exact; ``depth`` is a lower bound on the distance to the
    complement (exact for discs, rectangles and polygons).
    """

    filled = False

    def distance(self, z) -> np.ndarray:
        raise NotImplementedError

    def depth(self, z) -> np.ndarray:
        return np.zeros(len(as_points(z)))

    def bbox(self):
        raise NotImplementedError

    def boundary_samples(self, step: float) -> np.ndarray:
        raise NotImplementedError

    def sample_points(self, step: float) -> np.ndarray:
        return self.boundary_samples(step)

    def mark(self, mask, window, h, tol) -> None:
        """Set ``mask`` true where the cell center is within ``tol`` of the shape."""
        sl = _index_box(window, h, self.bbox(), tol, mask.shape)
        pts = _patch_centers(window, h, sl)
        if pts.size == 0:
            return
        d = self.distance(pts.ravel()).reshape(pts.shape)
        mask[sl] |= d <= tol * (1 + 1e-9)

    def to_json(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Point(Shape):
    z: complex

    def __post_init__(self):
        as_points(self.z)
        object.__setattr__(self, "z", complex(self.z))

    def distance(self, z):
        return np.abs(as_points(z) - self.z)

    def bbox(self):
        return (self.z.real, self.z.imag, self.z.real, self.z.imag)

    def boundary_samples(self, step):
        return np.array([self.z])

    def mark(self, mask, window, h, tol):
        if tol > h * SQRT_HALF * (1 + 1e-9):
            return Shape.mark(self, mask, window, h, tol)
        i = int(math.floor((self.z.real - window[0]) / h))
        j = int(math.floor((self.z.imag - window[1]) / h))
        if 0 <= j < mask.shape[0] and 0 <= i < mask.shape[1]:
            mask[j, i] = True

    def to_json(self):
        return {"kind": "point", "p": [self.z.real, self.z.imag]}


@dataclass(frozen=True)
class Disc(Shape):
    center: complex
    radius: float
    filled = True

    def __post_init__(self):
        as_points(self.center)
        object.__setattr__(self, "center", complex(self.center))
        if not (self.radius > 0 and math.isfinite(self.radius)):
            raise GeometryError(f"disc radius must be positive, got {self.radius}")

    def distance(self, z):
        return np.maximum(np.abs(as_points(z) - self.center) - self.radius, 0.0)

    def depth(self, z):
        return np.maximum(self.radius - np.abs(as_points(z) - self.center), 0.0)

    def bbox(self):
        c, r = self.center, self.radius
        return (c.real - r, c.imag - r, c.real + r, c.imag + r)

    def boundary_samples(self, step):
        return _circle_points(self.center, self.radius, step)

    def sample_points(self, step):
        lat = _lattice(self.bbox(), step)
        lat = lat[np.abs(lat - self.center) <= self.radius]
        return np.concatenate([self.boundary_samples(step), lat])

    def to_json(self):
        return {"kind": "disc", "c": [self.center.real, self.center.imag], "r": self.radius}


class _PolygonLike(Shape):
    filled = True

    def _verts(self) -> np.ndarray:
        raise NotImplementedError

    def edges(self):
        v = self._verts()
        return v, np.roll(v, -1)

    def contains(self, z):
        z = as_points(z)
        return _points_in_polygon(z, self._verts()) | (_segments_distance_chunked(z, *self.edges()) == 0)

    def distance(self, z):
        z = as_points(z)
        d = _segments_distance_chunked(z, *self.edges())
        return np.where(_points_in_polygon(z, self._verts()), 0.0, d)

    def depth(self, z):
        z = as_points(z)
        d = _segments_distance_chunked(z, *self.edges())
        return np.where(_points_in_polygon(z, self._verts()), d, 0.0)

    def bbox(self):
        v = self._verts()
        return (v.real.min(), v.imag.min(), v.real.max(), v.imag.max())

    def boundary_samples(self, step):
        return _resample_path(self._verts(), step, closed=True)

    def sample_points(self, step):
        lat = _lattice(self.bbox(), step)
        lat = lat[_points_in_polygon(lat, self._verts())]
        return np.concatenate([self.boundary_samples(step), lat])

    def mark(self, mask, window, h, tol):
        sl = _index_box(window, h, self.bbox(), tol, mask.shape)
        pts = _patch_centers(window, h, sl)
        if pts.size == 0:
            return
        flat = pts.ravel()
        inside = _points_in_polygon(flat, self._verts())
        sub = np.zeros(len(flat), dtype=bool)
        a, b = self.edges()
        # edge-local updates keep the cost proportional to perimeter
        for k in range(len(a)):
            ebox = (min(a[k].real, b[k].real), min(a[k].imag, b[k].imag),
                    max(a[k].real, b[k].real), max(a[k].imag, b[k].imag))
            near = ((flat.real >= ebox[0] - tol) & (flat.real <= ebox[2] + tol)
                    & (flat.imag >= ebox[1] - tol) & (flat.imag <= ebox[3] + tol))
            if np.any(near):
                sub[near] |= _segment_distance(flat[near], a[k:k + 1], b[k:k + 1]) <= tol * (1 + 1e-9)
        mask[sl] |= (inside | sub).reshape(pts.shape)


@dataclass(frozen=True)
class Rect(_PolygonLike):
    lo: complex
    hi: complex

    def __post_init__(self):
        lo, hi = complex(self.lo), complex(self.hi)
        as_points([lo, hi])
        if not (hi.real > lo.real and hi.imag > lo.imag):
            raise GeometryError("rectangle must have positive width and height")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def _verts(self):
        lo, hi = self.lo, self.hi
        return np.array([lo, complex(hi.real, lo.imag), hi, complex(lo.real, hi.imag)])

    def distance(self, z):
        z = as_points(z)
        dx = np.maximum.reduce([self.lo.real - z.real, np.zeros(len(z)), z.real - self.hi.real])
        dy = np.maximum.reduce([self.lo.imag - z.imag, np.zeros(len(z)), z.imag - self.hi.imag])
        return np.hypot(dx, dy)

    def depth(self, z):
        z = as_points(z)
        d = np.minimum.reduce([z.real - self.lo.real, self.hi.real - z.real,
                               z.imag - self.lo.imag, self.hi.imag - z.imag])
        return np.maximum(d, 0.0)

    def mark(self, mask, window, h, tol):
        Shape.mark(self, mask, window, h, tol)

    def to_json(self):
        return {"kind": "rect", "lo": [self.lo.real, self.lo.imag], "hi": [self.hi.real, self.hi.imag]}


def _check_simple(vertices: np.ndarray, closed: bool) -> bool:
    from shapely.geometry import LinearRing, LineString

    coords = np.column_stack([vertices.real, vertices.imag])
    geom = LinearRing(coords) if closed else LineString(coords)
    return bool(geom.is_simple)


@dataclass(frozen=True)
class Polygon(_PolygonLike):
    vertices: tuple

    def __post_init__(self):
        v = as_points(self.vertices)
        if len(v) >= 2 and v[0] == v[-1]:
            v = v[:-1]
        if len(v) < 3:
            raise GeometryError("polygon needs at least three vertices")
        if not _check_simple(v, closed=True):
            raise GeometryError("polygon must be simple")
        object.__setattr__(self, "vertices", tuple(complex(x) for x in v))
        object.__setattr__(self, "_v", v)

    def _verts(self):
        return self._v

    def to_json(self):
        return {"kind": "polygon", "vertices": [[v.real, v.imag] for v in self.vertices]}


@dataclass(frozen=True)
class Polyline(Shape):
    """A finite arc.  Self-intersection is rejected unless ``check=False``."""

    vertices: tuple
    check: bool = field(default=True, compare=False, repr=False)

    def __post_init__(self):
        v = as_points(self.vertices)
        if len(v) < 2:
            raise GeometryError("polyline needs at least two vertices")
        if self.check and not _check_simple(v, closed=False):
            raise GeometryError("polyline must not self-intersect")
        object.__setattr__(self, "vertices", tuple(complex(x) for x in v))
        object.__setattr__(self, "_v", v)

    def edges(self):
        return self._v[:-1], self._v[1:]

    def distance(self, z):
        return _segments_distance_chunked(as_points(z), *self.edges())

    def bbox(self):
        v = self._v
        return (v.real.min(), v.imag.min(), v.real.max(), v.imag.max())

    def boundary_samples(self, step):
        return _resample_path(self._v, step, closed=False)

    def length(self) -> float:
        return float(np.abs(np.diff(self._v)).sum())

    def mark(self, mask, window, h, tol):
        a, b = self.edges()
        for k in range(len(a)):
            ebox = (min(a[k].real, b[k].real), min(a[k].imag, b[k].imag),
                    max(a[k].real, b[k].real), max(a[k].imag, b[k].imag))
            sl = _index_box(window, h, ebox, tol, mask.shape)
            pts = _patch_centers(window, h, sl)
            if pts.size == 0:
                continue
            d = _segment_distance(pts.ravel(), a[k:k + 1], b[k:k + 1]).reshape(pts.shape)
            mask[sl] |= d <= tol * (1 + 1e-9)

    def to_json(self):
        return {"kind": "polyline", "vertices": [[v.real, v.imag] for v in self.vertices]}


@dataclass(frozen=True, eq=False)
class CellSet(Shape):
    """Centers of the marked cells of a raster, treated as filled cells for
    topology.  Produced by hole filling; distance is measured to the centers."""

    mask: np.ndarray
    window: tuple
    spacing: float
    filled = True

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        object.__setattr__(self, "mask", m)
        g = Grid(m, tuple(self.window), self.spacing)
        pts = g.cell_centers()
        object.__setattr__(self, "_pts", pts)
        object.__setattr__(self, "_tree", cKDTree(np.column_stack([pts.real, pts.imag])) if len(pts) else None)
        pad = np.pad(~m, 1, constant_values=True)
        jj, ii = np.nonzero(pad)
        out = (self.window[0] + (ii - 0.5) * self.spacing) + 1j * (self.window[1] + (jj - 0.5) * self.spacing)
        object.__setattr__(self, "_out_tree", cKDTree(np.column_stack([out.real, out.imag])))

    @property
    def points(self) -> np.ndarray:
        return self._pts

    def distance(self, z):
        z = as_points(z)
        if self._tree is None:
            return np.full(len(z), np.inf)
        d, _ = self._tree.query(np.column_stack([z.real, z.imag]))
        return d

    def depth(self, z):
        z = as_points(z)
        if self._tree is None:
            return np.zeros(len(z))
        d, _ = self._out_tree.query(np.column_stack([z.real, z.imag]))
        return np.maximum(d - self.spacing, 0.0)

    def bbox(self):
        p = self._pts
        if len(p) == 0:
            return (0.0, 0.0, 0.0, 0.0)
        return (p.real.min(), p.imag.min(), p.real.max(), p.imag.max())

    def boundary_samples(self, step):
        return self._pts

    def mark(self, mask, window, h, tol):
        if self._tree is None:
            return
        sl = _index_box(window, h, self.bbox(), tol, mask.shape)
        pts = _patch_centers(window, h, sl)
        if pts.size == 0:
            return
        flat = pts.ravel()
        d, _ = self._tree.query(np.column_stack([flat.real, flat.imag]), distance_upper_bound=tol * (1 + 1e-9) + 1e-15)
        mask[sl] |= (d <= tol * (1 + 1e-9)).reshape(pts.shape)

    def to_json(self):
        j, i = np.nonzero(self.mask)
        return {"kind": "cells", "window": list(self.window), "h": self.spacing,
                "cells": [[int(a), int(b)] for a, b in zip(j, i)]}


@dataclass(frozen=True, eq=False)
class Dilated(Shape):
    """The open r-neighborhood {z : dist(z, base) < r} of a shape."""

    base: Shape
    r: float
    filled = True

    def __post_init__(self):
        if not self.r > 0:
            raise GeometryError("dilation radius must be positive")

    def distance(self, z):
        return np.maximum(self.base.distance(z) - self.r, 0.0)

    def depth(self, z):
        d = self.base.distance(z)
        return np.where(d < self.r, self.r - d + self.base.depth(z), 0.0)

    def bbox(self):
        b = self.base.bbox()
        return (b[0] - self.r, b[1] - self.r, b[2] + self.r, b[3] + self.r)

    def boundary_samples(self, step):
        base = self.base.boundary_samples(step)
        n = max(8, int(math.ceil(2 * math.pi * self.r / step)))
        ring = (base[:, None] + self.r * np.exp(2j * np.pi * np.arange(n) / n)[None, :]).ravel()
        return ring[self.base.distance(ring) >= self.r * (1 - 1e-9)]

    def sample_points(self, step):
        lat = _lattice(self.bbox(), step)
        lat = lat[self.base.distance(lat) < self.r]
        return np.concatenate([self.base.sample_points(step), lat])

    def mark(self, mask, window, h, tol):
        if isinstance(self.base, Point):
            Shape.mark(self.base, mask, window, h, tol + self.r)
        else:
            self.base.mark(mask, window, h, tol + self.r)

    def to_json(self):
        return {"kind": "dilated", "r": self.r, "base": self.base.to_json()}


def dilate_shape(s: Shape, r: float) -> Shape:
    if isinstance(s, Disc):
        return Disc(s.center, s.radius + r)
    if isinstance(s, Point):
        return Disc(s.z, r)
    if isinstance(s, Dilated):
        return Dilated(s.base, s.r + r)
    return Dilated(s, r)


def _core(s: Shape):
    """Split a shape into (core, radius) with the shape = closed r-neighborhood of core."""
    if isinstance(s, Disc):
        return Point(s.center), s.radius
    if isinstance(s, Dilated):
        core, r = _core(s.base)
        return core, r + s.r
    return s, 0.0


def _core_points(s: Shape):
    if isinstance(s, Point):
        return np.array([s.z])
    if isinstance(s, CellSet):
        return s.points
    return None


def _core_segments(s: Shape):
    if isinstance(s, (_PolygonLike, Polyline)):
        return s.edges()
    return None


def shape_distance(s: Shape, t: Shape) -> float:
    """Exact Euclidean distance between two shapes."""
    cs, rs = _core(s)
    ct, rt = _core(t)
    ps, pt = _core_points(cs), _core_points(ct)
    if ps is not None:
        d = float(ct.distance(ps).min()) if len(ps) else math.inf
    elif pt is not None:
        d = float(cs.distance(pt).min()) if len(pt) else math.inf
    else:
        d = _segment_pair_distance(*_core_segments(cs), *_core_segments(ct))
        if d > 0:
            # one filled polygon may contain the other entirely
            if cs.filled and np.any(cs.distance(_core_segments(ct)[0][:1]) == 0):
                d = 0.0
            if ct.filled and np.any(ct.distance(_core_segments(cs)[0][:1]) == 0):
                d = 0.0
    return max(d - rs - rt, 0.0)


def shape_from_json(d: dict, window=None, h=None) -> Shape:
    kind = d.get("kind")
    pt = lambda p: complex(p[0], p[1])  # noqa: E731
    if kind == "disc":
        return Disc(pt(d["c"]), float(d["r"]))
    if kind == "rect":
        return Rect(pt(d["lo"]), pt(d["hi"]))
    if kind == "polygon":
        return Polygon(tuple(pt(v) for v in d["vertices"]))
    if kind == "polyline":
        return Polyline(tuple(pt(v) for v in d["vertices"]), check=d.get("check", True))
    if kind == "point":
        return Point(pt(d["p"]))
    if kind == "dilated":
        return Dilated(shape_from_json(d["base"], window, h), float(d["r"]))
    if kind == "cells":
        win = tuple(d.get("window", window))
        sp = float(d.get("h", h))
        mask = np.zeros(grid_shape(win, sp), dtype=bool)
        for j, i in d["cells"]:
            mask[j, i] = True
        return CellSet(mask, win, sp)
    raise GeometryError(f"unknown shape kind {kind!r}")


# ---------------------------------------------------------------------------
# Region
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Region:
    """Finite union of shapes on an axis-aligned window at grid spacing ``h``."""

    shapes: tuple
    window: tuple
    h: float

    def __post_init__(self):
        object.__setattr__(self, "shapes", tuple(self.shapes))
        win = tuple(float(w) for w in self.window)
        if len(win) != 4:
            raise GeometryError("window must be (x0, y0, x1, y1)")
        if not (win[2] > win[0] and win[3] > win[1]):
            raise GeometryError(f"degenerate window {win}")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise GeometryError("resolution must be positive")
        object.__setattr__(self, "window", win)
        object.__setattr__(self, "_raster", None)
        object.__setattr__(self, "_cache", {})

    # construction helpers -------------------------------------------------
    def with_shapes(self, shapes: Iterable[Shape]) -> "Region":
        return Region(tuple(shapes), self.window, self.h)

    def union(self, *others: "Region") -> "Region":
        shapes = list(self.shapes)
        for o in others:
            shapes.extend(o.shapes)
        return self.with_shapes(shapes)

    @classmethod
    def from_mask(cls, mask, window, h) -> "Region":
        mask = np.asarray(mask, dtype=bool)
        if not mask.any():
            return cls((), window, h)
        return cls((CellSet(mask, tuple(window), h),), window, h)

    @property
    def is_empty(self) -> bool:
        return len(self.shapes) == 0

    @property
    def stamp(self) -> dict:
        return {"window": list(self.window), "h": self.h}

    @property
    def half_diagonal(self) -> float:
        return self.h * SQRT_HALF

    def filled_part(self) -> "Region":
        return self.with_shapes(s for s in self.shapes if s.filled)

    def thin_part(self) -> "Region":
        return self.with_shapes(s for s in self.shapes if not s.filled)

    # metric ---------------------------------------------------------------
    def distance(self, z) -> np.ndarray:
        z = as_points(z)
        if self.is_empty:
            raise EmptyRegionError("distance to an empty set is undefined")
        return np.min([s.distance(z) for s in self.shapes], axis=0)

    def depth(self, z) -> np.ndarray:
        """Lower bound on dist(z, complement); exact for single convex shapes."""
        z = as_points(z)
        if self.is_empty:
            return np.zeros(len(z))
        return np.max([s.depth(z) for s in self.shapes], axis=0)

    def contains(self, z) -> np.ndarray:
        return self.distance(z) == 0

    def bbox(self):
        if self.is_empty:
            raise EmptyRegionError("empty region has no bounding box")
        bs = np.array([s.bbox() for s in self.shapes])
        return (bs[:, 0].min(), bs[:, 1].min(), bs[:, 2].max(), bs[:, 3].max())

    def sample_points(self, step: float | None = None) -> np.ndarray:
        step = self.h / 2 if step is None else step
        if self.is_empty:
            return np.zeros(0, dtype=complex)
        return np.concatenate([s.sample_points(step) for s in self.shapes])

    def boundary_samples(self, step: float | None = None) -> np.ndarray:
        step = self.h / 2 if step is None else step
        if self.is_empty:
            return np.zeros(0, dtype=complex)
        return np.concatenate([s.boundary_samples(step) for s in self.shapes])

    # raster ---------------------------------------------------------------
    def raster(self) -> Grid:
        if self._raster is None:
            object.__setattr__(self, "_raster", rasterize(self))
        return self._raster

    def out_of_window(self) -> list:
        """Indices of shapes that do not meet the window."""
        x0, y0, x1, y1 = self.window
        out = []
        for k, s in enumerate(self.shapes):
            b = s.bbox()
            if b[2] < x0 or b[0] > x1 or b[3] < y0 or b[1] > y1:
                out.append(k)
        return out

    def to_json(self) -> dict:
        return {"shapes": [s.to_json() for s in self.shapes], "window": list(self.window), "h": self.h}

    @classmethod
    def from_json(cls, d: dict, h: float | None = None) -> "Region":
        win = tuple(d["window"])
        sp = float(h if h is not None else d["h"])
        return cls(tuple(shape_from_json(s, win, sp) for s in d.get("shapes", [])), win, sp)


def rasterize(region: Region) -> Grid:
    """Cell raster of ``region`` at its own resolution."""
    ny, nx = grid_shape(region.window, region.h)
    if nx < 1 or ny < 1:
        raise GeometryError("window has zero area at this resolution")
    mask = np.zeros((ny, nx), dtype=bool)
    tol = region.half_diagonal
    for s in region.shapes:
        s.mark(mask, region.window, region.h, tol)
    return Grid(mask, region.window, region.h)


def distance(z, region: Region):
    """dist(z, A), exact per primitive; scalar in, scalar out."""
    d = region.distance(z)
    return float(d[0]) if np.ndim(z) == 0 else d


def region_distance(a: Region, b: Region) -> float:
    """Exact distance between two shape unions."""
    if a.is_empty or b.is_empty:
        raise EmptyRegionError("distance to an empty set is undefined")
    return min(shape_distance(s, t) for s in a.shapes for t in b.shapes)


def clearance(k: Region, u: Region, step: float | None = None) -> float:
    """Sampled dist(K, complement of U); +inf for empty K, 0 if K leaves U."""
    if k.is_empty:
        return math.inf
    pts = k.sample_points(step)
    return float(u.depth(pts).min())


def dilate(a: Region, r: float) -> Region:
    """The r-neighborhood A(r) = {z : dist(z, A) < r}."""
    if not r > 0:
        raise GeometryError(f"dilation radius must be positive, got {r}")
    return a.with_shapes(dilate_shape(s, r) for s in a.shapes)


def sup_norm_diff(f_vals, g_vals) -> float:
    """max |f - g| over aligned samples."""
    f = np.asarray(f_vals, dtype=complex)
    g = np.asarray(g_vals, dtype=complex)
    if f.shape != g.shape:
        raise GeometryError("samples are not aligned")
    if f.size == 0:
        raise EmptyRegionError("empty sample set")
    return float(np.abs(f - g).max())


def clip_thin(shapes: Sequence[Shape], keep: Region, step: float) -> list:
    """Restrict thin shapes to the closed set ``keep`` (resolution ``step``)."""
    out = []
    for s in shapes:
        if isinstance(s, Point):
            if keep.distance(s.z)[0] == 0:
                out.append(s)
        elif isinstance(s, Polyline):
            v = _resample_path(np.asarray(s.vertices), step, closed=False)
            inside = keep.distance(v) == 0
            start = None
            for k, flag in enumerate(np.append(inside, False)):
                if flag and start is None:
                    start = k
                elif not flag and start is not None:
                    if k - start >= 2:
                        out.append(Polyline(tuple(v[start:k]), check=False))
                    elif k - start == 1:
                        out.append(Point(v[start]))
                    start = None
        else:
            raise GeometryError(f"cannot clip {type(s).__name__}")
    return out
