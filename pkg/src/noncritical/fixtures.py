"""Reference sets used by tests, scenarios and the CLI."""

from __future__ import annotations

import math

import numpy as np

from .planar_sets import Dilated, Disc, Point, Polyline, Rect, Region

DEFAULT_WINDOW = (-4.0, -4.0, 4.0, 4.0)


def disc_chain(h: float = 0.02, window=DEFAULT_WINDOW, n_max: int | None = None) -> Region:
    """{0} ∪ ⋃ B̄(1/n, 1/(2n(n+1))): disjoint discs accumulating at the origin.

    The chain is truncated once the centers come within h/4 of the origin;
    the omitted discs all lie inside the cell band around 0.
    """
    if n_max is None:
        n_max = max(8, int(math.ceil(4.0 / h)))
    shapes = [Disc(1.0 / n, 1.0 / (2 * n * (n + 1))) for n in range(1, n_max + 1)]
    shapes.append(Point(0.0))
    return Region(tuple(shapes), window, h)


def disc_chain_gap(n: int) -> float:
    """Exact gap between consecutive chain discs n and n+1."""
    return 1.0 / (n * (n + 1) * (n + 2))


def tangent_discs(h: float = 0.02, window=DEFAULT_WINDOW) -> Region:
    """⋃_{n∈ℤ} B̄(n, 1/2) restricted to the discs meeting the window."""
    lo = int(math.floor(window[0] - 0.5))
    hi = int(math.ceil(window[2] + 0.5))
    shapes = [Disc(float(n), 0.5) for n in range(lo, hi + 1)
              if n + 0.5 >= window[0] and n - 0.5 <= window[2]]
    return Region(tuple(shapes), window, h)


def circle_polyline(center: complex, radius: float, n: int = 720) -> Polyline:
    t = 2 * np.pi * np.arange(n + 1) / n
    pts = center + radius * np.exp(1j * t)
    pts[-1] = pts[0]
    return Polyline(tuple(pts))


def annulus(r_in: float = 1.0, r_out: float = 2.0, h: float = 0.02, window=DEFAULT_WINDOW,
            center: complex = 0.0) -> Region:
    """Closed annulus r_in ≤ |z - center| ≤ r_out as a thickened circle."""
    mid = (r_in + r_out) / 2
    return Region((Dilated(circle_polyline(center, mid), (r_out - r_in) / 2),), window, h)


def segment(a: complex, b: complex, h: float = 0.02, window=DEFAULT_WINDOW) -> Region:
    return Region((Polyline((complex(a), complex(b))),), window, h)


def oscillating_graph(h: float = 0.005, window=(-1.0, -8.0, 1.0, 8.0), u_max: float = 40.0,
                      du: float = 0.005) -> Region:
    """Graph of (1/x)·sin(1/x) for x in [1/u_max, window right edge]."""
    u = np.arange(1.0 / window[2], u_max, du)
    x = 1.0 / u
    y = u * np.sin(u)
    pts = (x + 1j * y)[::-1]
    return Region((Polyline(tuple(pts)),), window, h)


def two_discs_with_arc(h: float = 0.02, window=DEFAULT_WINDOW, offset: float = 1.5, radius: float = 0.5,
                       arc_radius: float = 1.6) -> Region:
    """Closed discs B̄(±offset, radius) joined by a circular arc through the upper half plane.

    The arc ends on the disc boundaries, where |arc_radius·e^{it} - offset| = radius.
    """
    cos_t = (arc_radius ** 2 + offset ** 2 - radius ** 2) / (2 * arc_radius * offset)
    if not -1 < cos_t < 1:
        raise ValueError("the arc does not meet the discs")
    t0 = np.arccos(cos_t)
    t = np.linspace(np.pi - t0, t0, 60)
    arc = arc_radius * np.exp(1j * t)
    return Region((Disc(-offset, radius), Disc(offset, radius), Polyline(tuple(arc))), window, h)


def square(side: float = 1.0, h: float = 0.02, window=DEFAULT_WINDOW) -> Region:
    s = side / 2
    return Region((Rect(complex(-s, -s), complex(s, s)),), window, h)
