"""Independent checks: zero counting, pointwise error audits, derivative floors."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContourError, EmptyRegionError
from .planar_sets import Region, as_points

ZERO_THRESHOLD = 1e-12
RE_SPREAD = 20.0  # max - min of Re log f′ that keeps |f′| clear of the relative zero guard
IM_SAFE = 1e4  # beyond this, rounding swamps the phase of exp


def _edges(contour) -> tuple[np.ndarray, np.ndarray]:
    v = as_points(contour)
    if len(v) < 3:
        raise ContourError("a contour needs at least three vertices")
    if v[0] == v[-1]:
        v = v[:-1]
    return v, np.roll(v, -1)


def count_zeros(fprime=None, contour=None, samples_per_edge: int = 64, log_fprime=None,
                max_points: int = 2_000_000) -> int:
    """Winding number of f′ along a closed polygon (zeros inside, with multiplicity).

    Principal-branch phase increments are summed; any increment of π/2 or more
    triggers bisection of that step.  With ``log_fprime`` (a holomorphic
    logarithm of f′, single valued along the contour) the increments of
    Im log f′ are summed as they are, which avoids overflow of exp.
    """
    if (fprime is None) == (log_fprime is None):
        raise ContourError("pass exactly one of fprime or log_fprime")
    a, b = _edges(contour)
    m = len(a)
    t = np.linspace(0, m, m * max(2, samples_per_edge) + 1)

    def at(tt):
        k = np.minimum(np.floor(tt).astype(int), m - 1)
        s = tt - k
        return a[k] + s * (b[k] - a[k])

    while True:
        z = at(t)
        if log_fprime is not None:
            lv = np.asarray(log_fprime(z), dtype=complex)
            if not np.all(np.isfinite(lv)):
                raise ContourError("log f′ is not finite on the contour")
            # a continuous logarithm needs no branch wrapping; its total change is 2π·winding
            steps = np.diff(lv.imag)
            break
        else:
            fv = np.asarray(fprime(z), dtype=complex)
            mag = np.abs(fv)
            if not np.all(np.isfinite(fv)):
                raise ContourError("f′ is not finite on the contour")
            if mag.min() <= ZERO_THRESHOLD * mag.max():
                k = int(np.argmin(mag))
                raise ContourError(f"zero of f′ on the contour near {z[k]:.6g}")
            steps = np.angle(fv[1:] / fv[:-1])
        bad = np.abs(steps) >= np.pi / 2
        if not bad.any():
            break
        if len(t) + bad.sum() > max_points:
            raise ContourError("contour too coarse or zero on contour: phase steps do not resolve")
        mids = (t[:-1][bad] + t[1:][bad]) / 2
        t = np.sort(np.concatenate([t, mids]))
    w = steps.sum() / (2 * np.pi)
    n = int(round(w))
    if abs(w - n) > 0.25:
        raise ContourError(f"winding sum {w:.4f} is not near an integer")
    return n


def circle_contour(center: complex, radius: float, n: int = 256) -> np.ndarray:
    return complex(center) + radius * np.exp(2j * np.pi * np.arange(n) / n)


def rect_contour(x0, y0, x1, y1) -> np.ndarray:
    return np.array([complex(x0, y0), complex(x1, y0), complex(x1, y1), complex(x0, y1)])


def default_contours(window, margin: float = 0.05) -> list[np.ndarray]:
    """Three inscribed circles plus the window rectangle pulled in by a margin."""
    x0, y0, x1, y1 = window
    c = complex((x0 + x1) / 2, (y0 + y1) / 2)
    R = min(x1 - x0, y1 - y0) / 2
    mx, my = margin * (x1 - x0), margin * (y1 - y0)
    out = [circle_contour(c, f * R) for f in (0.3, 0.6, 0.9)]
    out.append(rect_contour(x0 + mx, y0 + my, x1 - mx, y1 - my))
    return out


def zero_counts_noncritical(F, contours=None) -> list[int]:
    """Zero counts of F′ = exp(P) over the default contours of F's window."""
    contours = default_contours(F.window) if contours is None else contours
    out = []
    for c in contours:
        lv = F.log_derivative(_edges(c)[0])
        # principal phases of exp(P) whenever exp and its phase stay representable
        if np.ptp(lv.real) < RE_SPREAD and np.abs(lv.real).max() < 700 and np.abs(lv.imag).max() < IM_SAFE:
            out.append(count_zeros(F.derivative, c))
        else:
            out.append(count_zeros(log_fprime=F.log_derivative, contour=c))
    return out


@dataclass
class AuditReport:
    max_violation: float
    max_violation_at: complex | None
    worst_margin: float
    violations: list
    sample_count: int
    min_fprime: float | None = None
    min_fprime_at: complex | None = None
    zero_counts: list = field(default_factory=list)
    max_error: float = 0.0
    histogram: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.violations and all(c == 0 for c in self.zero_counts)

    def to_json(self) -> dict:
        def pt(z):
            return None if z is None else [complex(z).real, complex(z).imag]

        return {
            "pass": self.passed,
            "max_violation": {"value": self.max_violation, "location": pt(self.max_violation_at)},
            "worst_margin": self.worst_margin,
            "max_error": self.max_error,
            "violations": [{"index": i, "location": pt(z), "excess": e} for i, z, e in self.violations],
            "sample_count": self.sample_count,
            "min_fprime": {"value": self.min_fprime, "location": pt(self.min_fprime_at)},
            "zero_counts": self.zero_counts,
            "histogram": self.histogram,
            "tolerances": self.tolerances,
        }


def error_audit(F, f, eps, samples, F_values=None, f_values=None, bins: int = 10) -> AuditReport:
    """Pointwise |F - f| against ε at every sample; a violation is |F - f| ≥ ε."""
    z = as_points(samples)
    if len(z) == 0:
        raise EmptyRegionError("no samples to audit")
    Fv = np.asarray(F(z) if F_values is None else F_values, dtype=complex)
    fv = np.asarray(f(z) if f_values is None else f_values, dtype=complex)
    ev = np.broadcast_to(np.asarray(eps(z) if callable(eps) else eps, dtype=float), z.shape)
    err = np.abs(Fv - fv)
    excess = err - ev
    k = int(np.argmax(excess))
    bad = np.nonzero(excess >= 0)[0]
    ratio = err / ev
    top = max(1.0, float(ratio.max()))
    counts, edges = np.histogram(ratio, bins=bins, range=(0.0, top))
    return AuditReport(
        max_violation=float(excess[k]), max_violation_at=complex(z[k]),
        worst_margin=float(-excess[k]),
        violations=[(int(i), complex(z[i]), float(excess[i])) for i in bad],
        sample_count=len(z), max_error=float(err.max()),
        histogram={"ratio_edges": [float(e) for e in edges], "counts": [int(c) for c in counts]},
        tolerances={"eps_min": float(ev.min()), "eps_max": float(ev.max())},
    )


@dataclass(frozen=True)
class Floor:
    value: float
    location: complex
    refined_value: float
    converged: bool

    def __iter__(self):
        return iter((self.value, self.location))


def _region_grid(K: Region, step: float) -> np.ndarray:
    x0, y0, x1, y1 = K.bbox()
    xs = np.arange(x0, x1 + step / 2, step)
    ys = np.arange(y0, y1 + step / 2, step)
    pts = (xs[None, :] + 1j * ys[:, None]).ravel()
    pts = pts[K.distance(pts) == 0]
    return np.concatenate([pts, K.boundary_samples(step)])


def derivative_floor(fprime, K: Region, step: float | None = None) -> Floor:
    """Grid minimum of |F′| over K, repeated at half the step as a convergence estimate."""
    if K.is_empty:
        raise EmptyRegionError("empty region")
    step = K.h if step is None else step
    out = []
    for s in (step, step / 2):
        pts = _region_grid(K, s)
        a = np.abs(np.asarray(fprime(pts), dtype=complex))
        k = int(np.argmin(a))
        out.append((float(a[k]), complex(pts[k])))
    (v1, l1), (v2, l2) = out
    value, loc = (v1, l1) if v1 <= v2 else (v2, l2)
    return Floor(value, loc, v2, math.isclose(v1, v2, rel_tol=0.05))


def audit_noncritical(F, f, eps, samples, K: Region | None = None, contours=None,
                      tol: float = 1e-12) -> AuditReport:
    """Error audit of a NonCriticalEntire plus its zero counts and derivative floor."""
    rep = error_audit(lambda z: F(z, tol), f, eps, samples)
    rep.zero_counts = zero_counts_noncritical(F, contours)
    if K is not None:
        fl = derivative_floor(F.derivative, K)
        rep.min_fprime, rep.min_fprime_at = fl.value, fl.location
    else:
        z = as_points(samples)
        a = np.abs(F.derivative(z))
        k = int(np.argmin(a))
        rep.min_fprime, rep.min_fprime_at = float(a[k]), complex(z[k])
    rep.tolerances["quadrature"] = tol
    rep.tolerances["zero_threshold"] = ZERO_THRESHOLD
    return rep
