"""Entire functions with nowhere-vanishing derivative.

A :class:`NonCriticalEntire` stores F through a base point p, a base value
v₀ and a polynomial exponent P, with F(z) = v₀ + ∫_p^z exp(P(ζ)) dζ.  Since
F′ = exp(P), non-criticality holds by construction; numerics only enter when
F itself is evaluated.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components, dijkstra, minimum_spanning_tree
from scipy.spatial import cKDTree

from .approx_engine import PolyApprox, SampledTarget, fit_polynomial, sample_set
from .errors import (
    BranchError,
    CriticalPointError,
    GeometryError,
    QuadratureError,
    RelocationError,
)
from .planar_sets import Region, as_points

EXP_CONST_DELTA = 1.0
EXP_CONST_C = math.e - 1.0  # |e^w - 1| ≤ (e - 1)|w| for |w| ≤ 1

# Gauss-Kronrod 7/15 nodes and weights on [-1, 1]
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5, 7, 9, 11, 13]] = np.concatenate([_WG[:-1], _WG[::-1]])


def monomial_poly(coeffs, center: complex = 0.0, scale: float = 1.0) -> PolyApprox:
    """PolyApprox for Σ a_k ζ^k, ζ = (z - center)/scale."""
    a = np.asarray(coeffs, dtype=complex).ravel()
    if len(a) == 0:
        a = np.zeros(1, dtype=complex)
    n = len(a) - 1
    H = np.zeros((n + 1, n), dtype=complex)
    for k in range(n):
        H[k + 1, k] = 1.0
    return PolyApprox(complex(center), float(scale), a.copy(), H, {"max_residual": 0.0,
                                                                   "max_weighted_residual": 0.0,
                                                                   "tolerance_met": True})


def taylor_shift(coeffs, t0: complex) -> np.ndarray:
    """Ascending coefficients of q(z) = p(z - t0) for p = Σ a_k z^k."""
    a = np.asarray(coeffs, dtype=complex)
    n = len(a)
    out = np.zeros(n, dtype=complex)
    # Horner in the shifted variable: p(z - t0) = (...(a_n (z - t0) + a_{n-1})(z - t0) ...)
    for c in a[::-1]:
        shifted = np.zeros(n, dtype=complex)
        shifted[1:] = out[:-1]
        shifted -= t0 * out
        shifted[0] += c
        out = shifted
    return out


@dataclass(frozen=True, eq=False)
class NonCriticalEntire:
    """F(z) = v₀ + ∫_p^z exp(P(ζ)) dζ."""

    base_point: complex
    base_value: complex
    exponent: PolyApprox
    window: tuple | None = None
    certificate: dict = field(default_factory=dict)

    def __post_init__(self):
        as_points([self.base_point, self.base_value])
        object.__setattr__(self, "base_point", complex(self.base_point))
        object.__setattr__(self, "base_value", complex(self.base_value))
        if self.window is None:
            c, s = self.exponent.center, self.exponent.scale
            r = max(s, abs(self.base_point - c)) * 1.1
            object.__setattr__(self, "window", (c.real - r, c.imag - r, c.real + r, c.imag + r))
        else:
            object.__setattr__(self, "window", tuple(float(w) for w in self.window))

    @property
    def P(self) -> PolyApprox:
        return self.exponent

    def log_derivative(self, z):
        return self.exponent(np.asarray(z, dtype=complex))

    def derivative(self, z):
        return np.exp(self.log_derivative(z))

    def __call__(self, z, tol: float = 1e-12):
        return evaluate(self, z, tol)

    def with_branch(self, k: int) -> "NonCriticalEntire":
        """Same F with the exponent moved to another sheet (P + 2πik)."""
        e = self.exponent
        # adding a constant changes only the q_0 coefficient
        c = e.coefficients.copy()
        c[0] = c[0] + 2j * np.pi * k
        return NonCriticalEntire(self.base_point, self.base_value,
                                 PolyApprox(e.center, e.scale, c, e.hessenberg, dict(e.report)),
                                 self.window, dict(self.certificate))

    def to_json(self) -> dict:
        mono = self.exponent.zeta_monomials()
        return {
            "p": [self.base_point.real, self.base_point.imag],
            "v0": [self.base_value.real, self.base_value.imag],
            "P": [[c.real, c.imag] for c in mono],
            "P_variable": {"center": [self.exponent.center.real, self.exponent.center.imag],
                           "scale": self.exponent.scale},
            "P_basis": self.exponent.to_json(),
            "window": list(self.window),
            "certificate": self.certificate,
        }

    @classmethod
    def from_json(cls, d: dict) -> "NonCriticalEntire":
        if "P_basis" in d:
            P = PolyApprox.from_json(d["P_basis"])
        else:
            var = d.get("P_variable", {"center": [0, 0], "scale": 1.0})
            P = monomial_poly([complex(a, b) for a, b in d["P"]], complex(*var["center"]), var["scale"])
        return cls(complex(*d["p"]), complex(*d["v0"]), P, d.get("window"), d.get("certificate", {}))


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------


def _segment_integrals(P, a: np.ndarray, b: np.ndarray, tol: np.ndarray, max_intervals: int):
    """∫_{a_i}^{b_i} exp(P) with absolute error ≤ tol_i (adaptive GK7/15)."""
    n = len(a)
    total = np.zeros(n, dtype=complex)
    # active intervals: owner index, t0, t1 on [0, 1] of each segment
    owner = np.arange(n)
    t0 = np.zeros(n)
    t1 = np.ones(n)
    used = np.ones(n, dtype=int)
    nonzero = a != b
    owner, t0, t1 = owner[nonzero], t0[nonzero], t1[nonzero]
    while len(owner):
        d = b[owner] - a[owner]
        half = (t1 - t0) / 2
        mid = (t1 + t0) / 2
        ts = mid[:, None] + half[:, None] * _NODES[None, :]
        z = a[owner][:, None] + ts * d[:, None]
        vals = np.exp(P(z.ravel())).reshape(z.shape)
        scale = (d * half)[:, None]
        k = (vals * _WK[None, :]).sum(axis=1) * scale[:, 0]
        g = (vals * _WG15[None, :]).sum(axis=1) * scale[:, 0]
        if not np.all(np.isfinite(k)):
            raise QuadratureError("integrand overflowed")
        err = np.abs(k - g)
        ok = err <= tol[owner] * (t1 - t0)
        np.add.at(total, owner[ok], k[ok])
        bad = ~ok
        if not bad.any():
            break
        ow = owner[bad]
        np.add.at(used, ow, 1)
        if used.max() > max_intervals:
            raise QuadratureError(f"tolerance unreachable within {max_intervals} subintervals")
        m = mid[bad]
        owner = np.concatenate([ow, ow])
        t0, t1 = np.concatenate([t0[bad], m]), np.concatenate([m, t1[bad]])
    return total


def evaluate(F: NonCriticalEntire, z, tol: float = 1e-12, max_intervals: int = 4096):
    """F(z) by adaptive quadrature along the segment from the base point."""
    if not tol > 0:
        raise GeometryError("tolerance must be positive")
    zz = np.asarray(z, dtype=complex)
    flat = as_points(zz)
    a = np.full(len(flat), F.base_point)
    vals = F.base_value + _segment_integrals(F.exponent, a, flat, np.full(len(flat), tol), max_intervals)
    return complex(vals[0]) if zz.ndim == 0 else vals.reshape(zz.shape)


def evaluate_path(F: NonCriticalEntire, path, tol: float = 1e-12, max_intervals: int = 4096) -> complex:
    """F at the end of a polygonal path that starts at the base point."""
    v = as_points(path)
    if v[0] != F.base_point:
        v = np.concatenate([[F.base_point], v])
    m = len(v) - 1
    if m == 0:
        return F.base_value
    parts = _segment_integrals(F.exponent, v[:-1], v[1:], np.full(m, tol / m), max_intervals)
    return complex(F.base_value + parts.sum())


def derivative(F: NonCriticalEntire, z):
    return F.derivative(z)


# ---------------------------------------------------------------------------
# logarithm branches
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LogBranch:
    points: np.ndarray
    values: np.ndarray
    parent: np.ndarray  # tree parent index, -1 at the root
    root: int

    def tree_edges(self):
        k = np.nonzero(self.parent >= 0)[0]
        return np.column_stack([self.parent[k], k])


def _knn_graph(z: np.ndarray, k: int):
    tree = cKDTree(np.column_stack([z.real, z.imag]))
    k = min(k + 1, len(z))
    d, idx = tree.query(np.column_stack([z.real, z.imag]), k=k)
    rows = np.repeat(np.arange(len(z)), k - 1)
    cols = idx[:, 1:].ravel()
    w = d[:, 1:].ravel()
    keep = np.isfinite(w) & (cols < len(z))
    rows, cols, w = rows[keep], cols[keep], np.maximum(w[keep], 1e-300)
    return coo_matrix((w, (rows, cols)), shape=(len(z), len(z))).tocsr()


def log_branch(fprime, T: Region | None, samples, root: int | None = None, neighbours: int = 8,
               threshold: float = 1e-12, values=None) -> LogBranch:
    """Continuous logarithm of f′ on samples, continued along a spanning tree."""
    z = as_points(samples)
    fv = np.asarray(fprime(z) if values is None else values, dtype=complex)
    mag = np.abs(fv)
    if not np.all(np.isfinite(fv)):
        raise BranchError("f′ is not finite at every sample")
    k0 = int(np.argmin(mag))
    if mag[k0] <= threshold * max(float(mag.max()), 1e-300):
        raise CriticalPointError(f"critical point in target near {z[k0]:.6g}", location=complex(z[k0]))
    if len(z) == 1:
        return LogBranch(z, np.log(fv), np.array([-1]), 0)
    G = _knn_graph(z, neighbours)
    sym = G.maximum(G.T)
    ncomp, _ = connected_components(sym, directed=False)
    if ncomp > 1:
        raise BranchError(f"samples split into {ncomp} disconnected groups")
    mst = minimum_spanning_tree(sym)
    root = 0 if root is None else int(root)
    order, pred = breadth_first_order(mst.maximum(mst.T), root, directed=False)
    g = np.empty(len(z), dtype=complex)
    g[root] = np.log(fv[root])
    for i in order[1:]:
        p = pred[i]
        g[i] = g[p] + np.log(fv[i] / fv[p])
    # every kNN edge must agree with the tree continuation
    coo = sym.tocoo()
    jump = g[coo.col] - g[coo.row] - np.log(fv[coo.col] / fv[coo.row])
    if np.any(np.abs(jump) > 1.0):
        e = int(np.argmax(np.abs(jump)))
        raise BranchError(f"logarithm is not single valued near {z[coo.row[e]]:.6g}: "
                          "set not effectively hole-free at this sampling")
    parent = pred.copy()
    parent[root] = -1
    return LogBranch(z, g, parent, root)


# ---------------------------------------------------------------------------
# path lengths
# ---------------------------------------------------------------------------


def raster_path_lengths(T: Region, start: complex) -> tuple[float, np.ndarray]:
    """Shortest 8-neighbour paths inside the raster of T from the cell of ``start``.

    Returns the certified bound c = max length·(1 + 2h) + h and the per-cell
    distance array (inf where unreachable).
    """
    g = T.raster()
    mask = g.mask
    ny, nx = mask.shape
    idx = -np.ones(mask.shape, dtype=np.int64)
    j, i = np.nonzero(mask)
    idx[j, i] = np.arange(len(j))
    rows, cols, w = [], [], []
    h = g.spacing
    for dj, di, wt in ((0, 1, h), (1, 0, h), (1, 1, h * math.sqrt(2)), (1, -1, h * math.sqrt(2))):
        b = idx[max(0, dj):ny + min(0, dj), max(0, di):nx + min(0, di)]
        a = idx[max(0, -dj):ny - max(0, dj), max(0, -di):nx - max(0, di)]
        ok = (a >= 0) & (b >= 0)
        rows.append(a[ok])
        cols.append(b[ok])
        w.append(np.full(ok.sum(), wt))
    rows, cols, w = np.concatenate(rows), np.concatenate(cols), np.concatenate(w)
    graph = coo_matrix((w, (rows, cols)), shape=(len(j), len(j))).tocsr()
    centers = g.origin + ((i + 0.5) + 1j * (j + 0.5)) * h
    s = int(np.argmin(np.abs(centers - start)))
    dist = dijkstra(graph, directed=False, indices=s)
    if not np.all(np.isfinite(dist)):
        raise GeometryError("set is not path connected at this resolution")
    c = float(dist.max()) * (1 + 2 * h) + h
    out = np.full(mask.shape, np.inf)
    out[j, i] = dist
    return c, out


# ---------------------------------------------------------------------------
# the exponential-integral construction
# ---------------------------------------------------------------------------


def _as_callable(x):
    if callable(x):
        return x
    val = float(x)
    return lambda z: np.full(np.shape(z), val)


def build_noncritical(f, T, eps, r=None, fprime=None, samples=None, density: float = 40.0,
                      max_degree: int = 40, min_degree: int = 0, safety: float = 0.5,
                      seed: int = 0, audit_tol: float = 1e-12) -> NonCriticalEntire:
    """Entire F with F′ = exp(G) ≠ 0 and |F - f| < ε on the samples of T.

    G is a polynomial fit of a continuous logarithm g of f′ with pointwise
    tolerance safety·min{δ, ε/(C·r·|e^g|)}, so that along any path of length
    below r inside T the integrated error stays below ε.
    """
    region = T.region if hasattr(T, "region") else T
    fprime = fprime if fprime is not None else f.derivative
    eps_f = _as_callable(eps)
    z = sample_set(region, density, seed=seed) if samples is None else as_points(samples)
    x0, y0, x1, y1 = region.bbox()
    center = complex((x0 + x1) / 2, (y0 + y1) / 2)
    root = int(np.argmin(np.abs(z - center)))
    p = complex(z[root])
    c_len, _ = raster_path_lengths(region, p)
    r_f = _as_callable(1.25 * c_len if r is None else r)
    r_vals = r_f(z)
    if not np.all(r_vals > c_len):
        raise GeometryError(f"length scale r must exceed the path bound c = {c_len:.4g}")
    fp = np.asarray(fprime(z), dtype=complex)
    eps_vals = eps_f(z)
    eps_tilde = np.minimum(EXP_CONST_DELTA, eps_vals / (EXP_CONST_C * r_vals * np.abs(fp)))
    branch = log_branch(None, region, z, root=root, values=fp)
    G = fit_polynomial(SampledTarget(z, branch.values, safety * eps_tilde), max_degree, tol=1.0,
                       min_degree=min_degree)
    g = branch.values
    F = NonCriticalEntire(p, complex(np.asarray(f(np.array([p])))[0]), G,
                          window=_pad_window(region))
    Fz = evaluate(F, z, audit_tol)
    fz = np.asarray(f(z), dtype=complex)
    err = np.abs(Fz - fz)
    gap = np.abs(G(z) - g)
    chain = EXP_CONST_C * float((np.abs(fp) * gap).max()) * c_len
    cert = {
        "delta": EXP_CONST_DELTA, "C": EXP_CONST_C, "path_bound": c_len,
        "r_min": float(r_vals.min()), "eps_tilde_min": float(eps_tilde.min()),
        "degree": G.degree, "fit_tolerance_met": bool(G.report["tolerance_met"]),
        "max_weighted_residual": G.report["max_weighted_residual"] * safety,
        "audited_max_error": float(err.max()),
        "audited_max_ratio": float((err / eps_vals).max()),
        "chain_bound": chain, "samples": int(len(z)),
    }
    return NonCriticalEntire(F.base_point, F.base_value, G, F.window, cert)


def _pad_window(region: Region):
    x0, y0, x1, y1 = region.bbox()
    pad = max(0.1 * max(x1 - x0, y1 - y0), 4 * region.h, 0.05)
    return (x0 - pad, y0 - pad, x1 + pad, y1 + pad)


# ---------------------------------------------------------------------------
# relocation of critical points by translation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RelocationShift:
    t0: complex
    tau: float
    certificate: tuple
    h_tilde: PolyApprox

    def to_json(self) -> dict:
        return {"t0": [self.t0.real, self.t0.imag], "tau": self.tau,
                "certificate": [{"critical_point": [c.real, c.imag], "shifted": [s.real, s.imag],
                                 "distance": d} for c, s, d in self.certificate]}


def relocate_critical_points(h: PolyApprox, L: Region, delta: float, W=None, accept=None,
                             angles: int = 32, min_radius: float | None = None) -> RelocationShift:
    """Translate h so that no critical point near L stays on L.

    Candidates t₀ = τ·e^{2πik/angles} for τ = δ/2, δ/4, … are scanned; a
    candidate is admissible when every critical point within δ of L lands at
    distance ≥ τ/8 from L and ``accept(t0)`` holds.  h̃(z) = h(z - t₀).
    """
    if not delta > 0:
        raise RelocationError("δ must be positive")
    crit = h.critical_points()
    if len(crit):
        dist = L.distance(crit)
        near = crit[dist < delta]
    else:
        near = crit
    if len(near) == 0 and (accept is None or accept(0j)):
        return RelocationShift(0j, 0.0, (), h)
    if len(near):
        depth = L.depth(near)
        inner = near[depth >= L.half_diagonal]
        if len(inner):
            raise RelocationError(f"critical point {inner[0]:.6g} lies in the interior of L")
        if W is not None:
            for Wj in W:
                from .set_topology import interior_mask

                if (Wj.raster().mask & interior_mask(L)).any():
                    raise RelocationError("a critical-point neighbourhood meets the interior of L")
    floor = (L.h / 64) if min_radius is None else min_radius
    tau = delta / 2
    while tau >= floor:
        for k in range(angles):
            t0 = tau * complex(math.cos(2 * math.pi * k / angles), math.sin(2 * math.pi * k / angles))
            moved = near + t0
            d = L.distance(moved) if len(moved) else np.zeros(0)
            if len(d) and not np.all(d >= tau / 8):
                continue
            if accept is not None and not accept(t0):
                continue
            cert = tuple((complex(c), complex(m), float(x)) for c, m, x in zip(near, moved, d))
            return RelocationShift(t0, tau, cert, h.shifted(t0))
        tau /= 2
    raise RelocationError("relocation failed: no admissible translation above resolution scale")
