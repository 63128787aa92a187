"""Minimal SVG output: set rasters as run-length rectangles, error heat maps, markers."""

from __future__ import annotations

import numpy as np

from .planar_sets import Grid, Region


def _ramp(t: float) -> str:
    """Blue→yellow→red for t in [0, 1]."""
    t = float(np.clip(t, 0.0, 1.0))
    if t < 0.5:
        s = t / 0.5
        r, g, b = 40 + s * 215, 60 + s * 175, 200 - s * 170
    else:
        s = (t - 0.5) / 0.5
        r, g, b = 255, 235 - s * 200, 30
    return f"#{int(r):02x}{int(g):02x}{int(b):02x}"


class Canvas:
    def __init__(self, window, width: int = 640):
        self.x0, self.y0, self.x1, self.y1 = (float(v) for v in window)
        self.scale = width / (self.x1 - self.x0)
        self.width = width
        self.height = int(round((self.y1 - self.y0) * self.scale))
        self.items: list[str] = []

    def px(self, z: complex) -> tuple[float, float]:
        return (z.real - self.x0) * self.scale, (self.y1 - z.imag) * self.scale

    def raster(self, grid: Grid, fill: str, opacity: float = 1.0) -> None:
        h = grid.spacing * self.scale
        ny, nx = grid.mask.shape
        for j in range(ny):
            row = grid.mask[j]
            if not row.any():
                continue
            d = np.diff(np.concatenate([[0], row.astype(np.int8), [0]]))
            starts, ends = np.nonzero(d == 1)[0], np.nonzero(d == -1)[0]
            y = (self.y1 - (grid.window[1] + (j + 1) * grid.spacing)) * self.scale
            for a, b in zip(starts, ends):
                x = (grid.window[0] + a * grid.spacing - self.x0) * self.scale
                self.items.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{(b - a) * h:.2f}" '
                                  f'height="{h:.2f}" fill="{fill}" fill-opacity="{opacity}"/>')

    def heat(self, points, values, vmax: float | None = None, radius: float = 2.0) -> None:
        values = np.asarray(values, dtype=float)
        top = float(values.max()) if vmax is None else vmax
        top = top if top > 0 else 1.0
        for z, v in zip(np.asarray(points, dtype=complex), values):
            x, y = self.px(complex(z))
            self.items.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{radius}" fill="{_ramp(v / top)}"/>')

    def crosses(self, points, size: float = 5.0, stroke: str = "#d00") -> None:
        for z in np.atleast_1d(np.asarray(points, dtype=complex)):
            x, y = self.px(complex(z))
            self.items.append(f'<path d="M{x - size:.2f},{y - size:.2f}L{x + size:.2f},{y + size:.2f}'
                              f'M{x - size:.2f},{y + size:.2f}L{x + size:.2f},{y - size:.2f}" '
                              f'stroke="{stroke}" stroke-width="1.5"/>')

    def text(self, s: str, x: float = 8, y: float = 16) -> None:
        s = s.replace("&", "&amp;").replace("<", "&lt;")
        self.items.append(f'<text x="{x}" y="{y}" font-family="monospace" font-size="12">{s}</text>')

    def to_string(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
                f'viewBox="0 0 {self.width} {self.height}">')
        bg = f'<rect width="{self.width}" height="{self.height}" fill="#fff"/>'
        return "\n".join([head, bg, *self.items, "</svg>"]) + "\n"


def region_svg(region: Region, layers=(), crit=(), heat=None, title: str = "") -> str:
    """Set raster, optional extra (mask, colour) layers, heat map (points, values), markers."""
    c = Canvas(region.window)
    for grid, fill in layers:
        c.raster(grid, fill, 0.35)
    c.raster(region.raster(), "#333")
    if heat is not None:
        c.heat(*heat)
    if len(crit):
        c.crosses(crit)
    if title:
        c.text(title)
    return c.to_string()
