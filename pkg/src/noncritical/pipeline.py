"""Staged approximation of a target on a closed set by non-critical entire functions.

Stage n works on L = (E ∪ K_{n-1}) ∩ K_{n+1}: fit a polynomial h to the
previous stage target, translate it so that its critical points leave L,
rebuild it as a non-critical entire function g, and glue g to the previous
target with a bump that equals 1 near K_n and 0 outside K_{n+1}.  Every error
is split into three measured parts that must each stay below a third of the
stage budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial import cKDTree

from .approx_engine import (
    BudgetLedger,
    SampledTarget,
    chart_radius,
    derivative_floor_of,
    fit_polynomial,
    safety_margin,
    sample_set,
    telescoping_budget,
)
from .audit import AuditReport, error_audit, zero_counts_noncritical
from .errors import NoncriticalError, ResolutionError, StageError
from .noncrit_core import NonCriticalEntire, build_noncritical, evaluate, relocate_critical_points
from .planar_sets import Polyline, Region, as_points, clearance, clip_thin, dilate, region_distance
from .set_topology import (
    EIGHT,
    ClosedSetModel,
    Exhaustion,
    build_exhaustion,
    classify_carleman,
    decompose_semi_admissible,
    is_runge,
    separating_rho,
)
from .targets import smooth_step

# ---------------------------------------------------------------------------
# bump and mixtures
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Bump:
    """χ(z) = η(dist(z, U₂)/gap): 1 on U₂, 0 once dist(z, U₂) ≥ gap."""

    U2: Region
    gap: float

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        return smooth_step(self.U2.distance(z.ravel()) / self.gap).reshape(z.shape)


def bump(U1: Region, U2: Region) -> Bump:
    """Bump supported in U₁ and equal to 1 on the closure of U₂."""
    gap = clearance(U2, U1)
    if not gap > U2.h:
        raise ResolutionError(f"gap {gap:.3g} between U2 and the complement of U1 is below resolution")
    return Bump(U2, gap)


@dataclass(frozen=True, eq=False)
class Mixture:
    """f = χ·g + (1 - χ)·prev, taking prev or g verbatim where χ is 0 or 1."""

    chi: Bump
    g: object
    prev: object

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        out = np.array(self.prev(flat), dtype=complex)
        c = self.chi(flat)
        on = c > 0
        if on.any():
            gv = np.asarray(self.g(flat[on]), dtype=complex)
            cv = c[on]
            out[on] = np.where(cv == 1, gv, cv * gv + (1 - cv) * out[on])
        return out.reshape(z.shape)

    def derivative(self, z):
        """Derivative where χ is locally constant (the only places it is used)."""
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        c = self.chi(flat)
        out = np.empty(len(flat), dtype=complex)
        one, zero = c == 1, c == 0
        mid = ~(one | zero)
        if one.any():
            out[one] = self.g.derivative(flat[one])
        if zero.any():
            out[zero] = self.prev.derivative(flat[zero])
        if mid.any():
            out[mid] = c[mid] * self.g.derivative(flat[mid]) + (1 - c[mid]) * self.prev.derivative(flat[mid])
        return out.reshape(z.shape)


class _Entire:
    """Callable wrapper fixing the quadrature tolerance of a NonCriticalEntire."""

    def __init__(self, F: NonCriticalEntire, tol: float):
        self.F, self.tol = F, tol

    def __call__(self, z):
        return evaluate(self.F, z, self.tol)

    def derivative(self, z):
        return self.F.derivative(z)


# ---------------------------------------------------------------------------
# stage bookkeeping
# ---------------------------------------------------------------------------


@dataclass
class StageState:
    n: int
    f_prev: object
    f_n: object
    g: NonCriticalEntire
    eps_tilde_prev: float
    thirds: tuple
    record: dict = field(default_factory=dict)


@dataclass
class PipelineResult:
    final: NonCriticalEntire
    ledger: BudgetLedger
    audit: AuditReport
    trace: list
    exhaustion: Exhaustion
    stages: list
    samples: np.ndarray
    table: dict

    @property
    def passed(self) -> bool:
        return self.audit.passed and self.table["bound_holds"]

    def to_json(self) -> dict:
        return {
            "final": self.final.to_json(),
            "ledger": self.ledger.to_json(),
            "audit": self.audit.to_json(),
            "trace": self.trace,
            "exhaustion": [{"nu": p.nu, "absorbed": list(p.absorbed), "filled_cells": p.filled_cells}
                           for p in self.exhaustion.provenance],
            "final_bound_holds": self.table["bound_holds"],
            "pass": self.passed,
        }

    def trace_csv(self) -> str:
        cols = ["n", "eps_prev", "eps_tilde_prev", "delta1", "rho", "third_fit", "third_shift",
                "third_rebuild", "t0_abs", "fit_degree", "exp_degree", "rho1", "cond2", "cond3_exact"]
        rows = [",".join(cols)]
        for t in self.trace:
            rows.append(",".join(repr(t.get(c)) if isinstance(t.get(c), float) else str(t.get(c)) for c in cols))
        return "\n".join(rows) + "\n"


def final_bound(ledger: BudgetLedger, p=None, stage_of_p: int = 1) -> float:
    """Σ_{k ≥ max(0, stage-1)} ε̃_k over the ledger."""
    start = max(0, int(stage_of_p) - 1)
    return float(sum(ledger.eps_tilde[start:]))


# ---------------------------------------------------------------------------
# corridors
# ---------------------------------------------------------------------------


def corridors(L: Region, avoid=(), clearance_cells: float = 2.0) -> list:
    """Segments joining the 8-connected raster components of L along a spanning tree."""
    g = L.raster()
    lab, n = ndimage.label(g.mask, structure=EIGHT)
    if n <= 1:
        return []
    pts = [g.cell_centers(lab == k) for k in range(1, n + 1)]
    trees = [cKDTree(np.column_stack([p.real, p.imag])) for p in pts]
    D = np.zeros((n, n))
    pair = {}
    for i in range(n):
        for j in range(i + 1, n):
            d, idx = trees[j].query(np.column_stack([pts[i].real, pts[i].imag]))
            k = int(np.argmin(d))
            D[i, j] = D[j, i] = max(float(d[k]), 1e-12)
            pair[(i, j)] = (complex(pts[i][k]), complex(pts[j][idx[k]]))
    mst = minimum_spanning_tree(D).tocoo()
    avoid = as_points(avoid) if len(avoid) else np.zeros(0, dtype=complex)
    out = []
    for i, j in sorted(zip(mst.row.tolist(), mst.col.tolist())):
        a, b = pair[(min(i, j), max(i, j))]
        out.append(_bent_segment(a, b, avoid, clearance_cells * L.h))
    return out


def _bent_segment(a: complex, b: complex, avoid: np.ndarray, gap: float) -> Polyline:
    seg = Polyline((a, b))
    if len(avoid) == 0 or float(seg.distance(avoid).min()) > gap:
        return seg
    d = b - a
    normal = 1j * d / abs(d)
    mid = (a + b) / 2
    for s in (1, -1, 2, -2, 4, -4):
        bent = Polyline((a, mid + s * 2 * gap * normal + 0.0, b))
        if float(bent.distance(avoid).min()) > gap:
            return bent
    raise StageError("corridor cannot avoid the critical points", step="d")


# ---------------------------------------------------------------------------
# stage
# ---------------------------------------------------------------------------


@dataclass
class PipelineConfig:
    density: float = 100.0
    max_degree: int = 60
    exp_max_degree: int = 60
    f_margin: float = 0.25
    safety: float = 0.5
    seed: int = 0
    quad_tol: float = 1e-13
    extra_compacts: int = 2
    # fits and rebuilds aim at budget·aim; only the full budget is enforced.
    # Over-solving keeps g_n close to f_n off L, which the next stage inherits.
    aim: float = 1e-2
    probe_step: float = 0.25


def _region_union(window, h, parts) -> Region:
    shapes = []
    for p in parts:
        shapes.extend(p.shapes)
    return Region(tuple(shapes), window, h)


def stage_step(n: int, model: ClosedSetModel, ex: Exhaustion, f_prev, eps_tilde_prev: float,
               cfg: PipelineConfig, U_prev: Region | None, transitions: list,
               E_samples: np.ndarray, probes: np.ndarray | None = None) -> tuple[StageState, Region, float]:
    """One pass of fit, relocation, rebuild and gluing."""
    E = model.region
    win, h = E.window, E.h
    K = ex.compacts
    Kp, Kn, Kq = K[n - 1], K[n], K[n + 1]
    et = eps_tilde_prev
    budget = et / 3
    rec: dict = {"n": n, "eps_tilde_prev": et}

    # (a) the set L and the enlargements H1 ⊂ H2
    kq_mask = Kq.raster().mask
    h_in, h_out, h_new = [], [], []
    kp_mask = Kp.raster().mask if not Kp.is_empty else np.zeros_like(kq_mask)
    for comp, cm in zip(model.h_components, model.h_masks):
        if (cm & kq_mask).any():
            h_in.append(comp)
            if (cm & ~kp_mask).any():
                h_new.append(comp)
        else:
            h_out.append(comp)
    L_H = _region_union(win, h, [Kp] + h_in)
    thin = clip_thin(model.s_part.shapes, Kq, h / 2) if not model.s_part.is_empty else []
    L = Region(L_H.shapes + tuple(thin), win, h)
    if L.is_empty:
        raise StageError("L is empty", stage=n, step="a")
    if not is_runge(L):
        raise StageError("L is not Runge", stage=n, step="a")
    if L_H.is_empty:
        rho, H1, H2, delta1 = None, None, None, math.inf
    else:
        # f_{n-1} is holomorphic near a new group up to the earlier bump transition
        # annuli {ρ₁/2 < dist(·, K_k) < ρ₁}
        parts = [U_prev] if U_prev is not None else []
        for c in h_new:
            margin = min([cfg.f_margin] + [region_distance(c, Kk) - r1 for Kk, r1 in transitions])
            parts.append(dilate(c, margin))
        U = _region_union(win, h, parts)
        try:
            rho = separating_rho(L_H, U, h_out)
        except ResolutionError as exc:
            raise StageError(str(exc), stage=n, step="a") from exc
        H1, H2 = dilate(L_H, rho / 2), dilate(L_H, rho)
        # (b) derivative floor and chart radius give the fit margin
        floor = derivative_floor_of(f_prev.derivative, H2)
        r_c = chart_radius(H1, H2)
        delta1 = safety_margin(floor.value, r_c)
        rec.update(m_prev=floor.value, chart_radius=r_c)
    rec.update(rho=rho, delta1=delta1)
    fit_region = L if H2 is None else Region(L.shapes + H2.shapes, win, h)
    if not is_runge(fit_region):
        raise StageError("L ∪ H2 is not Runge", stage=n, step="a")
    zL = sample_set(L, cfg.density, seed=cfg.seed + n)
    zH = sample_set(fit_region, cfg.density, seed=cfg.seed + 100 + n)
    Z = np.unique(np.concatenate([zL, zH]))
    tol_h = min(delta1, budget)
    vals = np.asarray(f_prev(Z), dtype=complex)
    # over-solve when the cap allows it, otherwise take the lowest degree meeting the budget
    for aim in (cfg.aim, 1.0):
        hpoly = fit_polynomial(SampledTarget(Z, vals, cfg.safety * aim * tol_h), cfg.max_degree, tol=1.0)
        if hpoly.report["tolerance_met"]:
            break
    if not hpoly.report["tolerance_met"]:
        raise StageError(f"fit misses its tolerance {tol_h:.3g} at degree cap {cfg.max_degree} "
                         f"(best residual {hpoly.report['max_residual']:.3g})",
                         stage=n, step="b")
    fL = np.asarray(f_prev(zL), dtype=complex)
    third1 = float(np.abs(hpoly(zL) - fL).max())
    rec.update(fit_degree=hpoly.degree, fit_aim=aim, third_fit=third1,
               fit_sup_on_H2=float(np.abs(hpoly(Z) - vals).max()))
    if H1 is not None:
        rec["h_floor_on_H1"] = derivative_floor_of(hpoly.derivative, H1).value

    # (c) move critical points off L
    hL = hpoly(zL)

    def accept(t0: complex) -> bool:
        if t0 == 0:
            return True
        s = np.linspace(0.0, 1.0, 5)
        pts = (zL[:, None] - s[None, :] * t0).ravel()
        bound = float(np.abs(hpoly.derivative(pts)).max()) * abs(t0)
        return bound < 0.9 * budget

    reloc_delta = min(1.0, rho / 2) if rho is not None else 0.5
    try:
        reloc = relocate_critical_points(hpoly, L, reloc_delta, accept=accept)
    except NoncriticalError as exc:
        raise StageError(str(exc), stage=n, step="c") from exc
    htil = reloc.h_tilde
    third2 = float(np.abs(htil(zL) - hL).max())
    rec.update(t0_abs=abs(reloc.t0), third_shift=third2, relocated=len(reloc.certificate))

    # (d) non-critical rebuild on a connected cover of L
    crit = htil.critical_points()
    T = Region(L.shapes + tuple(corridors(L, crit)), win, h)
    if not is_runge(T):
        raise StageError("corridor cover of L has holes", stage=n, step="d")
    try:
        for aim in (cfg.aim, 1.0):
            g = build_noncritical(htil, T, 0.9 * aim * budget, fprime=htil.derivative, density=cfg.density,
                                  max_degree=cfg.exp_max_degree, seed=cfg.seed + 200 + n,
                                  audit_tol=cfg.quad_tol)
            if g.certificate["fit_tolerance_met"]:
                break
    except NoncriticalError as exc:
        raise StageError(str(exc), stage=n, step="d") from exc
    gv = evaluate(g, zL, cfg.quad_tol)
    third3 = float(np.abs(gv - htil(zL)).max())
    rec.update(exp_degree=g.exponent.degree, third_rebuild=third3, rebuild_certificate=g.certificate)
    thirds = (third1, third2, third3)
    for name, t in zip(("b", "c", "d"), thirds):
        if not t < budget:
            raise StageError(f"third {t:.3g} exceeds ε̃/3 = {budget:.3g}", stage=n, step=name)

    # (e) glue with a bump around K_n
    try:
        rho1 = separating_rho(Kn, Kq, [c for c in model.h_components])
    except ResolutionError as exc:
        raise StageError(str(exc), stage=n, step="e") from exc
    U2 = dilate(Kn, rho1 / 2)
    chi = Bump(U2, rho1 / 2)
    gE = _Entire(g, cfg.quad_tol)
    f_n = Mixture(chi, gE, f_prev)
    cond2 = float(np.abs(f_n(zL) - fL).max())
    off = E_samples[Kq.distance(E_samples) > 0]
    rec["cond3_E_samples"] = int(len(off))
    if probes is not None:
        off = np.concatenate([off, probes[Kq.distance(probes) > 0]])
    if len(off):
        a, b = f_n(off), f_prev(off)
        cond3 = a.tobytes() == b.tobytes()
    else:
        cond3 = True
    rec.update(rho1=rho1, cond2=cond2, cond3_exact=bool(cond3), cond3_samples=int(len(off)),
               third_sum=float(sum(thirds)))
    if not cond2 < et:
        raise StageError(f"stage change {cond2:.3g} is not below ε̃ = {et:.3g}", stage=n, step="e")
    if not cond3:
        raise StageError("f_n differs from f_{n-1} outside K_{n+1}", stage=n, step="e")
    state = StageState(n, f_prev, f_n, g, et, thirds, rec)
    return state, U2, rho1


def run_pipeline(E, f, eps, N: int, config: PipelineConfig | None = None) -> PipelineResult:
    """Build g_N with |g_N - f| < ε on the samples of E ∩ K_N."""
    cfg = config or PipelineConfig()
    if N < 1:
        raise StageError("need at least one stage")
    model = E if isinstance(E, ClosedSetModel) else decompose_semi_admissible(E)
    if not model:
        raise StageError(f"set is not semi-admissible at this scale: {model.reason}", stage=0,
                         witness=model.witness)
    region = model.region
    verdict = classify_carleman(model)
    if not verdict.verdicts["no_holes"] or not verdict.verdicts["beh"]:
        raise StageError("set fails the hole/BEH gate", stage=0)
    eps_f = eps if callable(eps) else (lambda z, v=float(eps): np.full(np.shape(z), v))
    ex = build_exhaustion(model, N + cfg.extra_compacts)
    K = ex.compacts
    for comp in model.h_components:
        derivative_floor_of(f.derivative, dilate(comp, cfg.f_margin))
    zE = np.unique(np.concatenate([sample_set(region, cfg.density, seed=cfg.seed), region.sample_points()]))
    # χ = 0 off K_{n+1} everywhere, so a window lattice widens the exactness check
    # when E itself sits inside K_{n+1}
    x0, y0, x1, y1 = region.window
    gx = np.arange(x0, x1 + 1e-9, cfg.probe_step)
    gy = np.arange(y0, y1 + 1e-9, cfg.probe_step)
    probes = (gx[None, :] + 1j * gy[:, None]).ravel()
    epsE = np.asarray(eps_f(zE), dtype=float)
    eps_n = []
    for n in range(N + 1):
        inside = K[min(n + 2, len(K) - 1)].distance(zE) == 0
        eps_n.append(float(epsE[inside].min()) if inside.any() else float(epsE.min()))
    for n in range(1, len(eps_n)):
        eps_n[n] = min(eps_n[n], eps_n[n - 1])
    delta_tilde = [eps_n[0]]
    ledger = telescoping_budget(delta_tilde, eps_n[:1])
    f_prev, U_prev, transitions = f, None, []
    stages, trace = [], []
    for n in range(1, N + 1):
        state, U_prev, rho1 = stage_step(n, model, ex, f_prev, ledger.eps_tilde[n - 1], cfg,
                                         U_prev, transitions, zE, probes)
        transitions.append((K[n], rho1))
        floor = derivative_floor_of(None, K[n], log_fprime=state.g.log_derivative)
        r_n = chart_radius(K[n - 1], K[n]) if not K[n - 1].is_empty else 1.0
        delta_tilde.append(safety_margin(floor.value, r_n))
        ledger = telescoping_budget(delta_tilde, eps_n[:n + 1])
        rec = dict(state.record)
        rec.update(eps_prev=eps_n[n - 1], delta_tilde=delta_tilde[-1])
        trace.append(rec)
        stages.append(state)
        f_prev = state.f_n
    final = stages[-1].g
    inK = K[N].distance(zE) == 0
    zA = zE[inK]
    Fv = evaluate(final, zA, cfg.quad_tol)
    fv = np.asarray(f(zA), dtype=complex)
    rep = error_audit(None, None, eps_f, zA, F_values=Fv, f_values=fv)
    rep.zero_counts = zero_counts_noncritical(final)
    a = np.abs(final.derivative(zA))
    rep.min_fprime, rep.min_fprime_at = float(a.min()), complex(zA[int(np.argmin(a))])
    stage_of = ex.stage_of(zA)
    bounds = np.array([final_bound(ledger, None, s) for s in stage_of])
    err = np.abs(Fv - fv)
    table = {"points": zA, "error": err, "eps": np.asarray(eps_f(zA), dtype=float), "bound": bounds,
             "stage_of": stage_of, "bound_holds": bool(np.all(err <= bounds))}
    return PipelineResult(final, ledger, rep, trace, ex, stages, zE, table)
