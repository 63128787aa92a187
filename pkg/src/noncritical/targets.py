"""Built-in target functions and tolerance profiles, specified as plain data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoncriticalError
from .planar_sets import Region, shape_from_json


class TargetConfigError(NoncriticalError, ValueError):
    """Unknown or malformed target / tolerance specification."""


def _cx(v) -> complex:
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


@dataclass(frozen=True)
class Polynomial:
    coeffs: tuple  # ascending powers of (z - center)
    center: complex = 0j

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(np.asarray(z, dtype=complex) - self.center, self.coeffs)

    def derivative(self, z):
        c = np.polynomial.polynomial.polyder(np.asarray(self.coeffs, dtype=complex))
        return np.polynomial.polynomial.polyval(np.asarray(z, dtype=complex) - self.center, c) + 0j


@dataclass(frozen=True)
class Exp:
    """c·exp(a z + b)."""

    a: complex = 1.0
    b: complex = 0.0
    c: complex = 1.0

    def __call__(self, z):
        return self.c * np.exp(self.a * np.asarray(z, dtype=complex) + self.b)

    def derivative(self, z):
        return self.a * self(z)


@dataclass(frozen=True)
class AffineSin:
    """a z + b + c·sin(d z)."""

    a: complex = 1.0
    b: complex = 0.0
    c: complex = 0.3
    d: complex = 1.0

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return self.a * z + self.b + self.c * np.sin(self.d * z)

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        return self.a + self.c * self.d * np.cos(self.d * z)


def smooth_step(t):
    """C^∞ transition: 1 for t ≤ 0, 0 for t ≥ 1, strictly decreasing between."""
    t = np.asarray(t, dtype=float)
    out = np.where(t <= 0, 1.0, 0.0)
    mid = (t > 0) & (t < 1)
    if np.any(mid):
        s = t[mid]
        a = np.exp(-1.0 / (1.0 - s))
        b = np.exp(-1.0 / s)
        out = out.astype(float)
        out[mid] = a / (a + b)
    return out


@dataclass(frozen=True, eq=False)
class Piecewise:
    """Holomorphic pieces on neighbourhoods of regions, blended continuously elsewhere.

    Within ``margin`` of piece i the value is exactly piece i.  Elsewhere the
    weights are a softmax of 1/d_i, which is C^∞ and flat where a piece begins.
    """

    regions: tuple
    pieces: tuple
    margin: float = 0.1

    def _dist(self, z):
        return np.stack([np.maximum(r.distance(z) - self.margin, 0.0) for r in self.regions])

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        d = self._dist(flat)
        vals = np.stack([np.asarray(p(flat), dtype=complex) for p in self.pieces])
        inside = d == 0
        hit = inside.any(axis=0)
        with np.errstate(divide="ignore"):
            logw = np.where(inside, 0.0, 1.0 / d)
        logw = logw - logw.max(axis=0)
        w = np.exp(logw)
        blend = (w * vals).sum(axis=0) / w.sum(axis=0)
        exact = np.where(inside, vals, 0).sum(axis=0) / np.maximum(inside.sum(axis=0), 1)
        return np.where(hit, exact, blend).reshape(z.shape)

    def derivative(self, z):
        """Derivative of the active piece (defined only near the pieces)."""
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        d = self._dist(flat)
        k = np.argmin(d, axis=0)
        ders = np.stack([np.asarray(p.derivative(flat), dtype=complex) for p in self.pieces])
        out = ders[k, np.arange(len(flat))]
        return np.where(d.min(axis=0) == 0, out, np.nan).reshape(z.shape)


def target_from_json(conf: dict, window=None, h=None):
    kind = conf.get("kind")
    if kind == "polynomial":
        return Polynomial(tuple(_cx(c) for c in conf["coeffs"]), _cx(conf.get("center", 0)))
    if kind == "identity":
        return Polynomial((0j, 1 + 0j))
    if kind == "exp":
        return Exp(_cx(conf.get("a", 1)), _cx(conf.get("b", 0)), _cx(conf.get("c", 1)))
    if kind == "affine_sin":
        return AffineSin(_cx(conf.get("a", 1)), _cx(conf.get("b", 0)), _cx(conf.get("c", 0.3)),
                         _cx(conf.get("d", 1)))
    if kind == "piecewise":
        regions, pieces = [], []
        for p in conf["pieces"]:
            shapes = tuple(shape_from_json(s, window, h) for s in p["shapes"])
            regions.append(Region(shapes, window, h))
            pieces.append(target_from_json(p["target"], window, h))
        return Piecewise(tuple(regions), tuple(pieces), float(conf.get("margin", 0.1)))
    raise TargetConfigError(f"unknown target kind {kind!r}")


@dataclass(frozen=True)
class ConstantEps:
    value: float

    def __call__(self, z):
        return np.full(np.shape(z), self.value, dtype=float)


@dataclass(frozen=True)
class RadialEps:
    """Piecewise-linear profile in |z - center|, constant beyond the last knot."""

    radii: tuple
    values: tuple
    center: complex = 0j

    def __call__(self, z):
        r = np.abs(np.asarray(z, dtype=complex) - self.center)
        return np.interp(r, self.radii, self.values)


def eps_from_json(conf) -> object:
    if isinstance(conf, (int, float)):
        conf = {"kind": "constant", "value": conf}
    kind = conf.get("kind")
    if kind == "constant":
        v = float(conf["value"])
        if not v > 0:
            raise TargetConfigError("ε must be positive")
        return ConstantEps(v)
    if kind in ("radial", "piecewise"):
        knots = sorted((float(r), float(v)) for r, v in conf["knots"])
        if any(v <= 0 for _, v in knots):
            raise TargetConfigError("ε must be positive")
        return RadialEps(tuple(r for r, _ in knots), tuple(v for _, v in knots), _cx(conf.get("center", 0)))
    raise TargetConfigError(f"unknown ε kind {kind!r}")
