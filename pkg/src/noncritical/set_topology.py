"""Holes, hulls and the structural predicates of closed planar sets.

Everything here is decided on the raster of a :class:`Region` and stamped with
its window and resolution.  Set cells are 4-connected and complement cells are
8-connected, so a closed curve of set cells always separates the plane.  The
point at infinity is modeled by the window margin: a complement component that
touches the window border is unbounded, one that stays inside is a hole.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ExhaustionError, GeometryError, NotCompactError, ResolutionError
from .planar_sets import (
    CellSet,
    Disc,
    Region,
    clearance,
    dilate,
    grid_centers,
    region_distance,
)

FOUR = ndimage.generate_binary_structure(2, 1)
EIGHT = ndimage.generate_binary_structure(2, 2)


# ---------------------------------------------------------------------------
# raster helpers
# ---------------------------------------------------------------------------


def _touches_border(mask: np.ndarray, width=1) -> bool:
    """True if mask meets the outer band; ``width`` is cells or (rows, cols)."""
    wy, wx = (width, width) if np.isscalar(width) else width
    wy, wx = max(1, int(wy)), max(1, int(wx))
    return bool(mask[:wy].any() or mask[-wy:].any() or mask[:, :wx].any() or mask[:, -wx:].any())


def label_set(mask: np.ndarray):
    return ndimage.label(mask, structure=FOUR)


def label_complement(mask: np.ndarray):
    return ndimage.label(~mask, structure=EIGHT)


def holes_mask(mask: np.ndarray) -> list[np.ndarray]:
    """Complement components of ``mask`` that avoid the window border."""
    lab, n = label_complement(mask)
    border = np.unique(np.concatenate([lab[0], lab[-1], lab[:, 0], lab[:, -1]]))
    out = []
    for k in range(1, n + 1):
        if k not in border:
            out.append(lab == k)
    return out


def all_holes(mask: np.ndarray) -> np.ndarray:
    """Union of all holes; equivalent to the hole filling of ``mask``."""
    return _fill(mask) & ~mask


def _fill(mask: np.ndarray) -> np.ndarray:
    lab, n = label_complement(mask)
    border = np.unique(np.concatenate([lab[0], lab[-1], lab[:, 0], lab[:, -1]]))
    outside = np.isin(lab, border[border > 0])
    return ~outside


def interior_mask(region: Region) -> np.ndarray:
    """Cells lying entirely inside the set (center depth at least half a diagonal)."""
    if "interior" in region._cache:
        return region._cache["interior"]
    if region.is_empty:
        return np.zeros(region.raster().shape, dtype=bool)
    g = region.raster()
    out = np.zeros(g.shape, dtype=bool)
    j, i = np.nonzero(g.mask)
    if len(j):
        z = g.origin + ((i + 0.5) + 1j * (j + 0.5)) * g.spacing
        depth = region.depth(z)
        out[j, i] = depth >= region.half_diagonal * (1 - 1e-9)
    region._cache["interior"] = out
    return out


def raster_interior(mask: np.ndarray) -> np.ndarray:
    """Cells whose eight neighbours are all set (the digital interior)."""
    return ndimage.binary_erosion(mask, structure=EIGHT, border_value=0)


def _stamp(region: Region) -> dict:
    return {"window": list(region.window), "h": region.h}


# ---------------------------------------------------------------------------
# holes / hull / Runge
# ---------------------------------------------------------------------------


def holes(E: Region) -> list[Region]:
    """Bounded complementary components of E, each as a cell region."""
    g = E.raster()
    return [Region.from_mask(m, E.window, E.h) for m in holes_mask(g.mask)]


def _require_compact(K: Region, what: str = "set") -> None:
    g = K.raster()
    if _touches_border(g.mask):
        j, i = np.nonzero(g.mask)
        on = (j == 0) | (j == g.shape[0] - 1) | (i == 0) | (i == g.shape[1] - 1)
        wj, wi = j[on][0], i[on][0]
        witness = g.origin + ((wi + 0.5) + 1j * (wj + 0.5)) * g.spacing
        raise NotCompactError(f"{what} is not compact in window {list(K.window)}", witness=complex(witness))


def hull(K: Region) -> Region:
    """K with every hole filled."""
    _require_compact(K, "K")
    filled = all_holes(K.raster().mask)
    if not filled.any():
        return K
    return K.with_shapes(K.shapes + (CellSet(filled, K.window, K.h),))


def is_runge(K: Region) -> bool:
    _require_compact(K, "K")
    return len(holes_mask(K.raster().mask)) == 0


# ---------------------------------------------------------------------------
# reports and models
# ---------------------------------------------------------------------------


@dataclass
class TopologyReport:
    verdicts: dict
    window: tuple
    h: float
    hole_count: int = 0
    witnesses: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"verdicts": self.verdicts, "stamp": {"window": list(self.window), "h": self.h},
                "hole_count": self.hole_count, "witnesses": self.witnesses, "details": self.details}


@dataclass(frozen=True, eq=False)
class ClosedSetModel:
    """E = H ∪ S with H a finite family of compact groups and S thin."""

    region: Region
    h_components: tuple
    s_part: Region
    h_masks: tuple = ()
    sub_resolution: tuple = ()

    @property
    def window(self):
        return self.region.window

    @property
    def h(self):
        return self.region.h

    def h_union(self) -> Region:
        shapes = []
        for c in self.h_components:
            shapes.extend(c.shapes)
        return self.region.with_shapes(shapes)

    def h_mask(self) -> np.ndarray:
        out = np.zeros(self.region.raster().shape, dtype=bool)
        for m in self.h_masks:
            out |= m
        return out


@dataclass
class DecompositionFailure:
    reason: str
    witness: object = None
    details: dict = field(default_factory=dict)

    def __bool__(self):
        return False

    def to_json(self):
        w = self.witness
        if isinstance(w, complex):
            w = [w.real, w.imag]
        return {"semi_admissible": False, "reason": self.reason, "witness": w, "details": self.details}


def _thin_near_filled(E: Region, step: float) -> tuple[list, list]:
    """Split thin shapes into those within one cell of the filled part and the rest."""
    filled = E.filled_part()
    near, far = [], []
    for s in E.shapes:
        if s.filled:
            continue
        if filled.is_empty:
            far.append(s)
            continue
        pts = s.boundary_samples(step)
        if float(filled.distance(pts).max()) <= E.h:
            near.append(s)
        else:
            far.append(s)
    return near, far


def decompose_semi_admissible(E: Region, separation: float = 0.25):
    """Canonical decomposition H = closure of the interior, S = the rest.

    Raster components of H closer than ``separation`` form one group, so
    filled shapes accumulating at a point become a single compact.  Returns a
    :class:`ClosedSetModel` or a falsy :class:`DecompositionFailure`.
    """
    if E.is_empty:
        return ClosedSetModel(E, (), E)
    near, far = _thin_near_filled(E, E.h / 2)
    h_shapes = [s for s in E.shapes if s.filled] + near
    h_region = E.with_shapes(h_shapes)
    h_mask = h_region.raster().mask if h_shapes else np.zeros(E.raster().shape, dtype=bool)
    lab, ncomp = label_set(h_mask)
    groups_out, masks_out, sub_res = [], [], []
    if ncomp:
        # single linkage: components within `separation` share a group
        d = ndimage.distance_transform_edt(~h_mask) * E.h
        grown = d <= separation / 2 + E.h
        glab, _ = ndimage.label(grown, structure=EIGHT)
        comp_group = ndimage.maximum(glab, lab, index=np.arange(1, ncomp + 1))
        interior = interior_mask(h_region)
        for gid in sorted(set(int(x) for x in np.atleast_1d(comp_group))):
            members = [k + 1 for k, gg in enumerate(np.atleast_1d(comp_group)) if int(gg) == gid]
            gmask = np.isin(lab, members)
            if _touches_border(gmask):
                j, i = np.nonzero(gmask)
                g = E.raster()
                on = (j == 0) | (j == g.shape[0] - 1) | (i == 0) | (i == g.shape[1] - 1)
                wj, wi = j[on][0], i[on][0]
                wit = complex(g.origin + ((wi + 0.5) + 1j * (wj + 0.5)) * g.spacing)
                return DecompositionFailure(
                    "interior component touches the window boundary (unbounded in window)",
                    witness=wit, details={"group_cells": int(gmask.sum()), "stamp": _stamp(E)})
            shapes = []
            for s in h_shapes:
                m = np.zeros(gmask.shape, dtype=bool)
                s.mark(m, E.window, E.h, E.half_diagonal)
                if (m & gmask).any():
                    shapes.append(s)
            comp = E.with_shapes(shapes)
            if not (interior & gmask).any():
                sub_res.append(comp)
                continue
            groups_out.append(comp)
            masks_out.append(gmask)
    s_shapes = list(far)
    for c in sub_res:
        s_shapes.extend(c.shapes)
    s_region = E.with_shapes(s_shapes)
    return ClosedSetModel(E, tuple(groups_out), s_region, tuple(masks_out), tuple(sub_res))


def model_from_interior(E: Region) -> ClosedSetModel:
    """Fallback model whose H-groups are the raster interior components of E.

    Used when the canonical decomposition fails; groups may be unbounded.
    """
    inter = interior_mask(E)
    lab, n = label_set(inter)
    comps, masks = [], []
    filled = [s for s in E.shapes if s.filled]
    for k in range(1, n + 1):
        m = lab == k
        shapes = []
        for s in filled:
            sm = np.zeros(m.shape, dtype=bool)
            s.mark(sm, E.window, E.h, E.half_diagonal)
            if (sm & m).any():
                shapes.append(s)
        comps.append(E.with_shapes(shapes))
        masks.append(m)
    return ClosedSetModel(E, tuple(comps), E.thin_part(), tuple(masks))


# ---------------------------------------------------------------------------
# BEH, condition G, classification
# ---------------------------------------------------------------------------


def default_probes(window, h, fractions=(0.15, 0.35, 0.6)) -> list[Region]:
    x0, y0, x1, y1 = window
    c = complex((x0 + x1) / 2, (y0 + y1) / 2)
    R = min(x1 - x0, y1 - y0) / 2
    return [Region((Disc(c, f * R),), window, h) for f in fractions]


def _margin_cells(window, h, margin_frac) -> tuple[int, int]:
    """Band widths (rows, cols): a fraction of the window height and width."""
    x0, y0, x1, y1 = window
    return (max(1, int(math.ceil(margin_frac * (y1 - y0) / h))),
            max(1, int(math.ceil(margin_frac * (x1 - x0) / h))))


def check_beh(E: Region, probes=None, margin_frac: float = 0.1) -> TopologyReport:
    """Windowed BEH test: holes of E ∪ K must stay off the margin band."""
    probes = default_probes(E.window, E.h) if probes is None else probes
    band = _margin_cells(E.window, E.h, margin_frac)
    verdict, per_probe, witnesses = True, [], {}
    for idx, K in enumerate(probes):
        if K.window != E.window or K.h != E.h:
            K = Region(K.shapes, E.window, E.h)
        _require_compact(K, f"probe {idx}")
        m = E.raster().mask | K.raster().mask
        hs = holes_mask(m)
        reach = [hm for hm in hs if _touches_border(hm, band)]
        ok = not reach
        per_probe.append({"probe": idx, "holes": len(hs), "holes_in_margin": len(reach), "pass": ok})
        if not ok:
            verdict = False
            j, i = np.nonzero(reach[0])
            k = int(np.argmin(np.minimum.reduce([j, i, reach[0].shape[0] - 1 - j, reach[0].shape[1] - 1 - i])))
            g = E.raster()
            w = g.origin + ((i[k] + 0.5) + 1j * (j[k] + 0.5)) * g.spacing
            witnesses.setdefault("beh", [w.real, w.imag])
    return TopologyReport({"beh": "pass" if verdict else "fails at window scale"}, E.window, E.h,
                          details={"probes": per_probe, "margin_cells": list(band)}, witnesses=witnesses)


def _meets(mask_a: np.ndarray, mask_b: np.ndarray) -> bool:
    return bool((mask_a & mask_b).any())


def check_condition_g(model: ClosedSetModel, K: Region) -> Region:
    """Q = K ∪ (all H-groups meeting K), with the defining property verified."""
    E = model.region
    if K.window != E.window or K.h != E.h:
        K = Region(K.shapes, E.window, E.h)
    _require_compact(K, "K")
    km = K.raster().mask
    shapes = list(K.shapes)
    qmask = km.copy()
    for comp, cm in zip(model.h_components, model.h_masks):
        if _meets(cm, km):
            if _touches_border(cm):
                raise NotCompactError("an H-component meeting K touches the window boundary: window too small")
            shapes.extend(comp.shapes)
            qmask |= cm
    Q = K.with_shapes(shapes)
    # component scan of the interior of E
    lab, n = label_set(interior_mask(E))
    for k in range(1, n + 1):
        c = lab == k
        if _meets(c, km) and (c & ~Q.raster().mask).any():
            raise GeometryError("interior component meets K and leaves Q")
    return Q


def classify_carleman(E, probes=None, margin_frac: float = 0.1, separation: float = 0.25) -> TopologyReport:
    """Three-part windowed rule: no holes, BEH on probes, condition 𝒢 on probes."""
    if isinstance(E, ClosedSetModel):
        region, model, decomposed = E.region, E, E
    else:
        region = E
        decomposed = decompose_semi_admissible(region, separation)
        model = decomposed if decomposed else model_from_interior(region)
    probes = default_probes(region.window, region.h) if probes is None else probes
    hs = holes_mask(region.raster().mask)
    no_holes = not hs
    beh = check_beh(region, probes, margin_frac)
    beh_ok = beh.verdicts["beh"] == "pass"
    cond_g, g_note = True, None
    for K in probes:
        try:
            check_condition_g(model, K)
        except (NotCompactError, GeometryError) as exc:
            cond_g, g_note = None, str(exc)
            break
    if not no_holes or not beh_ok:
        carleman = False
    elif cond_g is None:
        carleman = None
    else:
        carleman = True
    verdicts = {
        "no_holes": no_holes,
        "beh": beh_ok,
        "condition_g": "inconclusive at window scale" if cond_g is None else cond_g,
        "carleman": "inconclusive at window scale" if carleman is None else carleman,
        "semi_admissible": bool(decomposed),
        "runge": no_holes if not _touches_border(region.raster().mask) else None,
    }
    details = {"beh": beh.details, "h_components": len(model.h_components)}
    area = (region.window[2] - region.window[0]) * (region.window[3] - region.window[1])
    details["components_per_unit_area"] = len(model.h_components) / area
    if not decomposed:
        details["decomposition"] = decomposed.to_json()
    if g_note:
        details["condition_g_note"] = g_note
    return TopologyReport(verdicts, region.window, region.h, hole_count=len(hs),
                          witnesses=beh.witnesses, details=details)


# ---------------------------------------------------------------------------
# exhaustion and separating neighborhoods
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExhaustionStep:
    nu: float
    filled_cells: int
    absorbed: tuple


@dataclass(frozen=True, eq=False)
class Exhaustion:
    compacts: tuple  # compacts[0] is the empty K₀
    provenance: tuple
    center: complex

    def __len__(self):
        return len(self.compacts)

    def stage_of(self, z) -> np.ndarray:
        """Least n with z in K_{n+1}, or len-1 beyond the last compact."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        out = np.full(len(z), len(self.compacts) - 1)
        for n in range(len(self.compacts) - 2, -1, -1):
            inside = self.compacts[n + 1].distance(z) == 0
            out[inside] = n
        return out


def _ring_mask(window, h, center, radius) -> np.ndarray:
    return np.abs(grid_centers(window, h) - center) <= radius


def build_exhaustion(model: ClosedSetModel, n_max: int, margin_cells: int = 2) -> Exhaustion:
    """Runge compacts K₁ ⊆ K₂ ⊆ … absorbing every H-group they touch."""
    E = model.region
    if n_max < 1:
        raise ExhaustionError("n_max must be at least 1")
    x0, y0, x1, y1 = E.window
    c = complex((x0 + x1) / 2, (y0 + y1) / 2)
    R = min(x1 - x0, y1 - y0) / 2
    em = E.raster().mask
    centers = grid_centers(E.window, E.h)
    compacts = [Region((), E.window, E.h)]
    prov = []
    prev_mask = np.zeros(em.shape, dtype=bool)
    prev_reach = 0.0
    step = R / (n_max + 1)
    # after absorbing a group K_n must still clear K_{n-1} by a usable margin
    advance = max(3 * E.h, 0.5 * step)
    for n in range(1, n_max + 1):
        nu = max(n * step, prev_reach + advance)
        if nu >= R - margin_cells * E.h:
            raise ExhaustionError(f"window exhausted at stage {n} (radius {nu:.4g})", stage=n)
        kmask = _ring_mask(E.window, E.h, c, nu)
        absorbed = set()
        filled = np.zeros(em.shape, dtype=bool)
        for _ in range(len(model.h_components) + 3):
            fill_e = all_holes(em | kmask)
            new = kmask | fill_e
            for k, cm in enumerate(model.h_masks):
                if k not in absorbed and _meets(cm, new):
                    absorbed.add(k)
                    new |= cm
            new |= all_holes(new)
            if (new == kmask).all():
                break
            filled |= fill_e
            kmask = new
        else:
            raise ExhaustionError("hole filling did not stabilise", stage=n)
        if _touches_border(kmask, margin_cells):
            raise ExhaustionError(f"window exhausted at stage {n}", stage=n)
        shapes = [Disc(c, nu)]
        for k in sorted(absorbed):
            shapes.extend(model.h_components[k].shapes)
        extra = kmask & ~Region(tuple(shapes), E.window, E.h).raster().mask
        if extra.any():
            shapes.append(CellSet(extra, E.window, E.h))
        K = Region(tuple(shapes), E.window, E.h)
        km = K.raster().mask
        # verify (i), (ii), Runge and nesting on the raster
        if holes_mask(em | km):
            raise ExhaustionError("property (i) failed: E ∪ K has holes", stage=n)
        for k, cm in enumerate(model.h_masks):
            if _meets(cm, km) and (cm & ~km).any():
                raise ExhaustionError(f"property (ii) failed for H-group {k}", stage=n)
        if holes_mask(km):
            raise ExhaustionError("K is not Runge", stage=n)
        if (prev_mask & ~raster_interior(km)).any():
            raise ExhaustionError("K_{n-1} is not inside the interior of K_n", stage=n)
        compacts.append(K)
        prov.append(ExhaustionStep(nu, int(filled.sum()), tuple(sorted(absorbed))))
        prev_mask = km
        prev_reach = float(np.abs(centers[km] - c).max()) + E.h
    return Exhaustion(tuple(compacts), tuple(prov), c)


def separating_rho(K: Region, U: Region, H=(), step: float | None = None) -> float:
    """ρ = ½·min(dist to H-groups missing K, dist(K, ∁U))."""
    if K.is_empty:
        raise GeometryError("K must be nonempty")
    km = K.raster().mask
    dists = [clearance(K, U, step)]
    for comp in H:
        if comp.is_empty:
            continue
        if comp.window != K.window or comp.h != K.h:
            comp = Region(comp.shapes, K.window, K.h)
        if _meets(comp.raster().mask, km):
            continue
        dists.append(region_distance(K, comp))
    rho = 0.5 * min(dists)
    if not rho >= K.h:
        raise ResolutionError(f"separating radius {rho:.3g} is below the resolution {K.h}")
    return rho


def neighborhood_separating(K: Region, U: Region, H=(), step: float | None = None) -> Region:
    """Open V = K(ρ) whose closure lies in U and meets only the H-groups K meets."""
    return dilate(K, separating_rho(K, U, H, step))
