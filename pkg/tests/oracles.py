"""Independent reference implementations used to cross-check the package.

Each oracle takes a different route from the code under test: shapely for
exact planar distances, a plain breadth-first flood fill for holes, numpy's
root finder for zero counts, and rational arithmetic for budgets.
"""

from __future__ import annotations

from collections import deque
from fractions import Fraction

import numpy as np
import shapely
from shapely.geometry import LineString, Point, Polygon

# Best uniform error of degree-n polynomials for |x| on [-1, 1], from a
# linear program on 4001 Chebyshev points (scipy HiGHS).  Frozen values.
MINIMAX_ABS = {20: 0.013986243018742295, 40: 0.0070011966180021845}


def shapely_geometry(shape):
    """Exact shapely geometry of a shape primitive (discs as 1024-gons)."""
    from noncritical.planar_sets import Dilated, Disc, Polygon as NPolygon, Polyline, Rect
    from noncritical.planar_sets import Point as NPoint

    if isinstance(shape, NPoint):
        return Point(shape.z.real, shape.z.imag)
    if isinstance(shape, Disc):
        return Point(shape.center.real, shape.center.imag).buffer(shape.radius, quad_segs=256)
    if isinstance(shape, Rect):
        return Polygon([(shape.lo.real, shape.lo.imag), (shape.hi.real, shape.lo.imag),
                        (shape.hi.real, shape.hi.imag), (shape.lo.real, shape.hi.imag)])
    if isinstance(shape, NPolygon):
        return Polygon([(v.real, v.imag) for v in shape.vertices])
    if isinstance(shape, Polyline):
        return LineString([(v.real, v.imag) for v in shape.vertices])
    if isinstance(shape, Dilated):
        return shapely_geometry(shape.base).buffer(shape.r, quad_segs=256)
    raise TypeError(type(shape).__name__)


def shapely_union(region):
    return shapely.union_all([shapely_geometry(s) for s in region.shapes])


def distance_oracle(z, region) -> np.ndarray:
    geom = shapely_union(region)
    z = np.atleast_1d(z)
    return shapely.distance(geom, shapely.points(z.real, z.imag))


def cell_mask_oracle(region) -> tuple[np.ndarray, np.ndarray]:
    """(mask, slack): raster by the center-distance rule via shapely, and
    each cell's distance from the rule's threshold."""
    from noncritical.planar_sets import grid_centers

    c = grid_centers(region.window, region.h)
    d = distance_oracle(c.ravel(), region).reshape(c.shape)
    tol = region.h * np.sqrt(0.5)
    return d <= tol, np.abs(d - tol)


def flood_outside(mask: np.ndarray) -> np.ndarray:
    """Complement cells reachable from the border through 8-neighbours (BFS)."""
    ny, nx = mask.shape
    seen = np.zeros_like(mask)
    q = deque()
    for j in range(ny):
        for i in (0, nx - 1):
            if not mask[j, i] and not seen[j, i]:
                seen[j, i] = True
                q.append((j, i))
    for i in range(nx):
        for j in (0, ny - 1):
            if not mask[j, i] and not seen[j, i]:
                seen[j, i] = True
                q.append((j, i))
    while q:
        j, i = q.popleft()
        for dj in (-1, 0, 1):
            for di in (-1, 0, 1):
                a, b = j + dj, i + di
                if 0 <= a < ny and 0 <= b < nx and not mask[a, b] and not seen[a, b]:
                    seen[a, b] = True
                    q.append((a, b))
    return seen


def hull_mask_oracle(mask: np.ndarray) -> np.ndarray:
    return ~flood_outside(mask)


def roots_inside(coeffs_ascending, center: complex, radius: float) -> int:
    r = np.roots(np.asarray(coeffs_ascending, dtype=complex)[::-1])
    return int(np.sum(np.abs(r - center) < radius))


def budget_oracle(delta_tilde, eps) -> tuple[list, list]:
    """δ_n and ε̃_n in exact rationals."""
    dt = [Fraction(x) for x in delta_tilde]
    ep = [Fraction(x) for x in eps]
    delta, et = [], []
    for n in range(len(dt)):
        delta.append(min(dt[:n + 1]) / 2 ** (n + 2))
        et.append(min(ep[n] / 2 ** (n + 1), delta[-1]))
    return delta, et


def naive_sup(f_vals, g_vals) -> float:
    best = 0.0
    for a, b in zip(f_vals, g_vals):
        best = max(best, abs(complex(a) - complex(b)))
    return best
