"""Polynomial fitting on sampled sets and the quantitative margins around it.

The fitter is a weighted Vandermonde-with-Arnoldi least-squares solver: the
basis is built by orthogonalizing successive multiplications by the scaled
variable against all earlier vectors (twice), so it stays well conditioned up
to high degree and can be re-evaluated anywhere through the stored Hessenberg
recurrence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import BudgetError, CriticalPointError, EmptyRegionError, FitError, GeometryError
from .planar_sets import Region, as_points, clearance

# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------


def _unique_points(z: np.ndarray, scale: float) -> np.ndarray:
    key = np.round(np.column_stack([z.real, z.imag]) / (scale * 1e-9)).astype(np.int64)
    _, idx = np.unique(key, axis=0, return_index=True)
    return z[np.sort(idx)]


def sample_set(T: Region, density: float, boundary_bias: float = 1.0, seed: int = 0) -> np.ndarray:
    """Quasi-uniform samples of T.

    Filled shapes receive a jittered lattice of spacing 1/√density plus about
    ``boundary_bias · perimeter · √density`` boundary points; arcs are sampled
    at spacing 1/density; isolated points are returned as they are.
    """
    if not density > 0:
        raise GeometryError("density must be positive")
    if T.is_empty:
        raise EmptyRegionError("cannot sample an empty region")
    rng = np.random.default_rng(seed)
    s = 1.0 / math.sqrt(density)
    out = []
    for shape in T.shapes:
        if shape.filled and not hasattr(shape, "points"):
            x0, y0, x1, y1 = shape.bbox()
            off = rng.uniform(0, s, size=2)
            xs = np.arange(x0 - s + off[0], x1 + s, s)
            ys = np.arange(y0 - s + off[1], y1 + s, s)
            lat = (xs[None, :] + 1j * ys[:, None]).ravel()
            lat = lat[shape.distance(lat) == 0]
            out.append(lat)
            if boundary_bias > 0:
                ring = shape.boundary_samples(s / (8 * max(boundary_bias, 1.0)))
                per = float(np.abs(np.diff(np.append(ring, ring[:1]))).sum())
                n = int(round(boundary_bias * per * math.sqrt(density)))
                if n > 0 and len(ring):
                    phase = rng.uniform(0, 1)
                    pick = ((np.arange(n) + phase) * len(ring) / n).astype(int) % len(ring)
                    out.append(ring[pick])
        elif hasattr(shape, "points"):
            out.append(shape.points)
        else:
            step = 1.0 / density
            out.append(shape.boundary_samples(step))
    z = np.concatenate(out) if out else np.zeros(0, dtype=complex)
    if len(z) == 0:
        raise EmptyRegionError("sampling produced no points")
    x0, y0, x1, y1 = T.bbox()
    return _unique_points(z, max(x1 - x0, y1 - y0, 1.0))


@dataclass(frozen=True, eq=False)
class SampledTarget:
    """Values of a target at sample points with pointwise tolerances."""

    points: np.ndarray
    values: np.ndarray
    weights: np.ndarray
    holomorphic: np.ndarray | None = None

    def __post_init__(self):
        p = as_points(self.points)
        v = np.asarray(self.values, dtype=complex).ravel()
        w = np.broadcast_to(np.asarray(self.weights, dtype=float), p.shape).copy()
        if len(v) != len(p):
            raise FitError("values and points differ in length")
        if not np.all(w > 0):
            raise FitError("weights must be positive")
        if not np.all(np.isfinite(v)):
            raise FitError("target values must be finite")
        hol = np.ones(len(p), dtype=bool) if self.holomorphic is None else np.asarray(self.holomorphic, bool)
        object.__setattr__(self, "points", p)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "holomorphic", hol)

    @classmethod
    def from_function(cls, f, points, weights=1.0, holomorphic=None) -> "SampledTarget":
        p = as_points(points)
        return cls(p, f(p), weights, holomorphic)


# ---------------------------------------------------------------------------
# Vandermonde with Arnoldi
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PolyApprox:
    """p(z) = Σ c_k q_k(ζ), ζ = (z - center)/scale, q_k from the Arnoldi recurrence."""

    center: complex
    scale: float
    coefficients: np.ndarray
    hessenberg: np.ndarray
    report: dict = field(default_factory=dict)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def _zeta(self, z):
        return (np.asarray(z, dtype=complex) - self.center) / self.scale

    def _basis(self, zeta: np.ndarray):
        n = self.degree
        Q = np.empty((len(zeta), n + 1), dtype=complex)
        Q[:, 0] = 1.0
        H = self.hessenberg
        # row-wise sums (not BLAS) keep each value independent of the batch
        for k in range(n):
            v = zeta * Q[:, k] - (Q[:, :k + 1] * H[:k + 1, k]).sum(axis=1)
            Q[:, k + 1] = v / H[k + 1, k]
        return Q

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        flat = self._zeta(z).ravel()
        return (self._basis(flat) * self.coefficients).sum(axis=1).reshape(z.shape)

    def derivative(self, z):
        z = np.asarray(z, dtype=complex)
        zeta = self._zeta(z).ravel()
        n = self.degree
        H = self.hessenberg
        Q = np.empty((len(zeta), n + 1), dtype=complex)
        D = np.zeros((len(zeta), n + 1), dtype=complex)
        Q[:, 0] = 1.0
        for k in range(n):
            Q[:, k + 1] = (zeta * Q[:, k] - (Q[:, :k + 1] * H[:k + 1, k]).sum(axis=1)) / H[k + 1, k]
            D[:, k + 1] = (Q[:, k] + zeta * D[:, k] - (D[:, :k + 1] * H[:k + 1, k]).sum(axis=1)) / H[k + 1, k]
        return ((D * self.coefficients).sum(axis=1) / self.scale).reshape(z.shape)

    def zeta_monomials(self) -> np.ndarray:
        """Coefficients a_k (ascending) with p = Σ a_k ζ^k."""
        n = self.degree
        H = self.hessenberg
        basis = [np.array([1.0 + 0j])]
        for k in range(n):
            v = np.zeros(k + 2, dtype=complex)
            v[1:] = basis[k]
            for j in range(k + 1):
                v[:len(basis[j])] -= H[j, k] * basis[j]
            basis.append(v / H[k + 1, k])
        out = np.zeros(n + 1, dtype=complex)
        for c, b in zip(self.coefficients, basis):
            out[:len(b)] += c * b
        return out

    def critical_points(self) -> np.ndarray:
        """Roots of p′ by companion-matrix eigenvalues with one Newton polish."""
        a = self.zeta_monomials()
        da = a[1:] * np.arange(1, len(a))
        roots = companion_roots(da)
        if len(roots) == 0:
            return roots
        dda = da[1:] * np.arange(1, len(da))
        p = np.polynomial.polynomial.polyval(roots, da)
        dp = np.polynomial.polynomial.polyval(roots, dda) if len(dda) else np.ones_like(roots)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(dp != 0, p / dp, 0)
        polished = roots - step
        better = np.abs(np.polynomial.polynomial.polyval(polished, da)) <= np.abs(p)
        roots = np.where(better & np.isfinite(polished), polished, roots)
        return self.center + self.scale * roots

    def shifted(self, t0: complex) -> "PolyApprox":
        """z ↦ p(z - t0): same basis coefficients about the moved center."""
        rep = dict(self.report)
        rep["shift"] = [complex(t0).real, complex(t0).imag]
        return PolyApprox(self.center + complex(t0), self.scale, self.coefficients, self.hessenberg, rep)

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "max_residual": self.report.get("max_residual"),
            "max_weighted_residual": self.report.get("max_weighted_residual"),
            "tolerance_met": self.report.get("tolerance_met"),
            "center": [self.center.real, self.center.imag],
            "scale": self.scale,
            "coefficients": [[c.real, c.imag] for c in self.coefficients],
            "hessenberg": [[[x.real, x.imag] for x in row] for row in self.hessenberg],
        }

    @classmethod
    def from_json(cls, d: dict) -> "PolyApprox":
        c = np.array([complex(a, b) for a, b in d["coefficients"]])
        H = np.array([[complex(a, b) for a, b in row] for row in d["hessenberg"]]).reshape(len(c), max(len(c) - 1, 0))
        rep = {k: d.get(k) for k in ("max_residual", "max_weighted_residual", "tolerance_met")}
        return cls(complex(*d["center"]), float(d["scale"]), c, H, rep)


def companion_roots(coeffs) -> np.ndarray:
    """Roots of Σ a_k x^k (ascending) as eigenvalues of the companion matrix."""
    a = np.trim_zeros(np.asarray(coeffs, dtype=complex), "b")
    n = len(a) - 1
    if n < 1:
        return np.zeros(0, dtype=complex)
    C = np.zeros((n, n), dtype=complex)
    C[1:, :-1] = np.eye(n - 1)
    C[:, -1] = -a[:-1] / a[-1]
    return np.linalg.eigvals(C)


def fit_polynomial(target: SampledTarget, max_degree: int, tol: float | None = None,
                   min_degree: int = 0, center: complex | None = None,
                   scale: float | None = None) -> PolyApprox:
    """Weighted least-squares polynomial fit with degree escalation.

    Residuals are measured as |p - f| / weight.  Degrees min_degree..max_degree
    are tried in order; the best fit so far is kept (so the reported residual
    never grows with max_degree) and the search stops once ``tol`` is met.
    """
    if max_degree < 0:
        raise FitError("max_degree must be nonnegative")
    z, f, w = target.points, target.values, target.weights
    M = len(z)
    if M <= max_degree:
        raise FitError(f"need more than {max_degree} samples, got {M}")
    span = max(float(np.ptp(z.real)), float(np.ptp(z.imag)), 1e-300)
    if len(_unique_points(z, span)) < M:
        raise FitError("duplicate sample points make the basis rank deficient")
    if center is None:
        center = complex((z.real.max() + z.real.min()) / 2, (z.imag.max() + z.imag.min()) / 2)
    if scale is None:
        scale = float(np.abs(z - center).max()) or 1.0
    zeta = (z - center) / scale
    d = 1.0 / w
    Q = np.empty((M, max_degree + 1), dtype=complex)
    H = np.zeros((max_degree + 1, max_degree), dtype=complex)
    norm0 = math.sqrt(M)
    # columns are orthonormal (times √M) in the weighted inner product; the
    # recurrence is homogeneous, so starting at q0 instead of 1 only rescales c
    q0 = norm0 / float(np.linalg.norm(d))
    Q[:, 0] = q0
    df = d * f
    coeffs = np.zeros(max_degree + 1, dtype=complex)
    approx = np.zeros(M, dtype=complex)
    best = None
    for k in range(max_degree + 1):
        if k > 0:
            v = zeta * Q[:, k - 1]
            for _ in range(2):
                hk = (np.conj(d[:, None] * Q[:, :k]).T @ (d * v)) / M
                v = v - Q[:, :k] @ hk
                H[:k, k - 1] += hk
            nv = np.linalg.norm(d * v) / norm0
            ref = np.linalg.norm(d * zeta * Q[:, k - 1]) / norm0
            if not nv > 1e-13 * max(ref, 1e-300):
                raise FitError(f"basis became rank deficient at degree {k}")
            H[k, k - 1] = nv
            Q[:, k] = v / nv
        coeffs[k] = np.vdot(d * Q[:, k], df) / M
        approx = approx + coeffs[k] * Q[:, k]
        if k < min_degree:
            continue
        res = np.abs(approx - f)
        wres = float((res / w).max())
        if best is None or wres < best[0]:
            best = (wres, k, float(res.max()))
        if tol is not None and wres <= tol:
            break
    wres, k, plain = best
    report = {"max_weighted_residual": wres, "max_residual": plain, "degree": k,
              "tolerance_met": tol is None or wres <= tol, "samples": M, "tolerance": tol}
    return PolyApprox(complex(center), float(scale), coeffs[:k + 1] * q0, H[:k + 1, :k].copy(), report)


# ---------------------------------------------------------------------------
# margins
# ---------------------------------------------------------------------------


def chart_radius(K: Region, H: Region, step: float | None = None) -> float:
    """r = min{1, dist(K, ∁H)} for the identity chart."""
    d = clearance(K, H, step)
    if not d > 0:
        raise GeometryError("K is not contained in the interior of H")
    return min(1.0, d)


def safety_margin(m: float, r: float) -> float:
    """δ = m·r/4: perturbations below δ keep |f′| ≥ m/2 on K."""
    if not (m > 0 and 0 < r <= 1):
        raise GeometryError(f"need m > 0 and 0 < r <= 1, got m={m}, r={r}")
    return m * r / 4


@dataclass(frozen=True)
class DerivativeFloor:
    value: float
    location: complex
    converged: bool
    step: float
    refined_value: float

    def __float__(self):
        return self.value

    def to_json(self):
        return {"value": self.value, "location": [self.location.real, self.location.imag],
                "converged": self.converged, "step": self.step, "refined_value": self.refined_value}


def derivative_floor_of(fprime, H: Region, step: float | None = None, rel_noise: float = 1e-12,
                        log_fprime=None) -> DerivativeFloor:
    """Sampled min |f′| over H at ``step`` and ``step/2``.

    With ``log_fprime`` (a logarithm of f′) the modulus is exp(Re log f′):
    overflow far from the minimum is harmless and f′ cannot vanish, so the
    critical-point guard is skipped.
    """
    if H.is_empty:
        raise EmptyRegionError("empty region")
    step = H.h if step is None else step
    vals = []
    for s in (step, step / 2):
        pts = H.sample_points(s)
        if log_fprime is not None:
            lv = np.asarray(log_fprime(pts), dtype=complex).real
            if np.isnan(lv).any() or np.isposinf(-lv).any():
                raise GeometryError("log f′ is not finite on the region")
            with np.errstate(over="ignore"):
                a = np.exp(lv)
            k = int(np.argmin(a))
            vals.append((float(a[k]), complex(pts[k]), float(a.max())))
            continue
        a = np.abs(fprime(pts))
        if not np.all(np.isfinite(a)):
            bad = complex(pts[int(np.argmin(np.isfinite(a)))])
            raise GeometryError(f"f′ is not finite on the region (first at {bad:.6g})")
        k = int(np.argmin(a))
        vals.append((float(a[k]), complex(pts[k]), float(a.max())))
    (m1, _, top1), (m2, loc2, top2) = vals
    m = min(m1, m2)
    if log_fprime is None and m <= rel_noise * max(top1, top2, 1e-300):
        raise CriticalPointError(f"critical point suspected near {loc2:.6g}", location=loc2)
    converged = abs(m1 - m2) <= 0.05 * max(m1, m2)
    return DerivativeFloor(m, loc2, converged, step, m2)


def min_derivative(f, H: Region, step: float | None = None) -> float:
    """min |f′| over the sample grid of H (``f`` exposes ``.derivative``)."""
    return derivative_floor_of(f.derivative, H, step).value


# ---------------------------------------------------------------------------
# budgets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BudgetLedger:
    delta_tilde: tuple
    delta: tuple
    eps: tuple
    eps_tilde: tuple

    def __len__(self):
        return len(self.delta)

    def tail_delta(self, n: int) -> Fraction:
        """Exact Σ_{k≥n} δ_k including the closed-form tail beyond the ledger."""
        N = len(self.delta) - 1
        m = min(Fraction(x) for x in self.delta_tilde)
        return sum((Fraction(x) for x in self.delta[n:]), Fraction(0)) + m / 2 ** (N + 2)

    def tail_eps_tilde(self, n: int) -> Fraction:
        return sum((Fraction(x) for x in self.eps_tilde[n:]), Fraction(0))

    def verify(self) -> None:
        for n in range(len(self.delta)):
            if not self.tail_delta(n) < Fraction(self.delta_tilde[n]):
                raise BudgetError(f"Σ δ_k from {n} is not below δ̃_{n}")
            want = min(Fraction(self.eps[n]) / 2 ** (n + 1), Fraction(self.delta[n]))
            if Fraction(self.eps_tilde[n]) != want:
                raise BudgetError(f"ε̃_{n} does not follow its formula")
        for n in range(1, len(self.delta)):
            if not self.tail_eps_tilde(n) <= Fraction(self.eps[n - 1]):
                raise BudgetError(f"Σ ε̃_k from {n} exceeds ε_{n - 1}")

    def to_json(self) -> dict:
        return {"delta_tilde": list(self.delta_tilde), "delta": list(self.delta),
                "eps": list(self.eps), "eps_tilde": list(self.eps_tilde)}


def telescoping_budget(delta_tilde, eps) -> BudgetLedger:
    """δ_n = 2^{-(n+2)}·min_{j≤n} δ̃_j and ε̃_n = min{2^{-n-1}ε_n, δ_n}."""
    dt = [float(x) for x in delta_tilde]
    ep = [float(x) for x in eps]
    if len(dt) != len(ep):
        raise BudgetError("δ̃ and ε must have the same length")
    if not all(x > 0 and math.isfinite(x) for x in dt + ep):
        raise BudgetError("budgets must be positive and finite")
    for n in range(1, len(ep)):
        if ep[n] > ep[n - 1]:
            raise BudgetError(f"ε_{n} = {ep[n]} exceeds ε_{n - 1} = {ep[n - 1]}")
    delta, et = [], []
    run = math.inf
    for n, x in enumerate(dt):
        run = min(run, x)
        delta.append(math.ldexp(run, -(n + 2)))
        et.append(min(math.ldexp(ep[n], -(n + 1)), delta[-1]))
    ledger = BudgetLedger(tuple(dt), tuple(delta), tuple(ep), tuple(et))
    ledger.verify()
    return ledger
