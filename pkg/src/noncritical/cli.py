"""Command-line front end: ``noncritical <command> SCENARIO [--out DIR] [--seed N] ...``.

Every command writes deterministic JSON (sorted keys, no timestamps) stamped
with the scenario hash, window and resolution.  Existing files are never
overwritten unless ``--force`` is given.  Exit codes: 0 success, 1 numeric
failure or failed audit, 2 usage, schema or output-directory error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .approx_engine import SampledTarget, fit_polynomial, sample_set
from .audit import audit_noncritical, default_contours
from .errors import NoncriticalError, StageError
from .noncrit_core import NonCriticalEntire, build_noncritical, evaluate
from .pipeline import PipelineConfig, run_pipeline
from .planar_sets import Disc, Region
from .scenario import Scenario, ScenarioError
from .set_topology import (
    build_exhaustion,
    check_beh,
    check_condition_g,
    classify_carleman,
    decompose_semi_admissible,
    holes,
    hull,
    is_runge,
    model_from_interior,
)
from .svg import region_svg

UNITS = {"length": "window units", "area": "square window units", "angle": "radians"}
TOPO_COMMANDS = ("holes", "hull", "runge", "beh", "condg", "decompose", "classify", "exhaust")


ERROR_MODULE = {
    "GeometryError": "planar_sets", "EmptyRegionError": "planar_sets",
    "NotCompactError": "set_topology", "ExhaustionError": "set_topology", "ResolutionError": "set_topology",
    "FitError": "approx_engine", "CriticalPointError": "approx_engine", "BudgetError": "approx_engine",
    "QuadratureError": "noncrit_core", "BranchError": "noncrit_core", "RelocationError": "noncrit_core",
    "StageError": "carleman_pipeline", "ContourError": "audit", "TargetConfigError": "targets",
}


class OutputExists(Exception):
    pass


def _plain(x):
    """Recursively convert numpy scalars/arrays and complex numbers to JSON types."""
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()]
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, float) and not np.isfinite(x):
        return None if np.isnan(x) else ("inf" if x > 0 else "-inf")
    return x


def dumps(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


class Outputs:
    def __init__(self, root: Path, force: bool):
        self.root, self.force = root, force
        self.written: list[str] = []

    def write(self, name: str, text: str) -> Path:
        path = self.root / name
        if path.exists() and not self.force:
            raise OutputExists(f"{path} exists; pass --force to overwrite")
        self.root.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        self.written.append(name)
        return path

    def json(self, name: str, sc: Scenario, command: str, body: dict) -> Path:
        doc = {"command": command, "stamp": sc.stamp(), "units": UNITS, "version": __version__, **body}
        return self.write(name, dumps(doc))


def _region_summary(R: Region) -> dict:
    g = R.raster()
    cells = int(g.mask.sum())
    return {"cells": cells, "area": cells * R.h ** 2, "bbox": list(R.bbox()) if cells else None}


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_topo(args, sc: Scenario, out: Outputs) -> int:
    E = sc.region()
    which = args.which
    body: dict = {}
    layers = []
    if which == "holes":
        hs = holes(E)
        body = {"hole_count": len(hs), "holes": [_region_summary(H) for H in hs]}
        layers = [(H.raster(), "#1f77b4") for H in hs]
    elif which == "hull":
        K = hull(E)
        body = {"set": _region_summary(E), "hull": _region_summary(K)}
        layers = [(K.raster(), "#2ca02c")]
    elif which == "runge":
        body = {"runge": is_runge(E)}
    elif which == "beh":
        body = check_beh(E, sc.probes()).to_json()
    elif which == "condg":
        model = decompose_semi_admissible(E)
        model = model if model else model_from_interior(E)
        K = sc.shapes("compact")
        if K is None:
            x0, y0, x1, y1 = E.window
            R = min(x1 - x0, y1 - y0) / 2
            K = Region((Disc(complex((x0 + x1) / 2, (y0 + y1) / 2), 0.35 * R),), E.window, E.h)
        Q = check_condition_g(model, K)
        body = {"compact": _region_summary(K), "Q": _region_summary(Q)}
        layers = [(Q.raster(), "#ff7f0e"), (K.raster(), "#1f77b4")]
    elif which == "decompose":
        model = decompose_semi_admissible(E)
        if model:
            body = {"semi_admissible": True, "h_groups": [_region_summary(c) for c in model.h_components],
                    "s_part": _region_summary(model.s_part),
                    "sub_resolution": list(model.sub_resolution)}
            layers = [(c.raster(), "#2ca02c") for c in model.h_components]
        else:
            body = model.to_json()
    elif which == "classify":
        body = classify_carleman(E, sc.probes()).to_json()
    elif which == "exhaust":
        model = decompose_semi_admissible(E)
        if not model:
            raise StageError(f"exhaustion needs a semi-admissible set: {model.reason}", stage=0)
        n_max = int(sc.section("exhaust").get("n_max", 3))
        ex = build_exhaustion(model, n_max)
        body = {"center": ex.center, "compacts": [
            {"n": k + 1, "nu": p.nu, "absorbed": list(p.absorbed), "filled_cells": p.filled_cells,
             **_region_summary(ex.compacts[k + 1])} for k, p in enumerate(ex.provenance)]}
        layers = [(K.raster(), "#1f77b4") for K in ex.compacts[1:]]
    out.json(f"topo_{which}.json", sc, f"topo {which}", body)
    out.write(f"topo_{which}.svg", region_svg(E, layers, title=f"topo {which}: {sc.name}"))
    print(dumps(body), end="")
    return 0


def cmd_fit(args, sc: Scenario, out: Outputs) -> int:
    E = sc.region()
    cfg = sc.section("fit")
    f = sc.target()
    z = sample_set(E, float(cfg.get("density", 40)), seed=sc.seed)
    tol = cfg.get("tol")
    tgt = SampledTarget(z, np.asarray(f(z), dtype=complex), np.ones(len(z)))
    p = fit_polynomial(tgt, int(cfg.get("max_degree", 40)), tol=tol)
    err = np.abs(p(z) - tgt.values)
    body = {"fit": p.to_json(), "samples": len(z), "max_error": float(err.max()),
            "critical_points": sorted(p.critical_points().tolist(), key=lambda c: (c.real, c.imag))}
    out.json("fit.json", sc, "fit", body)
    out.write("fit.svg", region_svg(E, heat=(z, err), crit=p.critical_points(), title=f"fit: {sc.name}"))
    print(f"degree {p.degree}  max error {err.max():.3e}")
    return 0


def cmd_noncrit(args, sc: Scenario, out: Outputs) -> int:
    E = sc.region()
    cfg = sc.section("noncrit")
    f, eps = sc.target(), sc.eps()
    F = build_noncritical(f, E, eps, r=cfg.get("r"), density=float(cfg.get("density", 40)),
                          max_degree=int(cfg.get("max_degree", 40)), safety=float(cfg.get("safety", 0.5)),
                          seed=sc.seed)
    out.json("noncrit.json", sc, "noncrit", {"function": F.to_json()})
    z = sample_set(E, float(cfg.get("density", 40)), seed=sc.seed)
    err = np.abs(evaluate(F, z) - f(z))
    out.write("noncrit.svg", region_svg(E, heat=(z, err), title=f"noncrit: {sc.name}"))
    print(f"exponent degree {F.exponent.degree}  audited max error {F.certificate['audited_max_error']:.3e}")
    return 0


def cmd_pipeline(args, sc: Scenario, out: Outputs) -> int:
    E = sc.region()
    p = sc.section("pipeline")
    cfg = PipelineConfig(seed=sc.seed, **{k: v for k, v in p.items() if k != "N"})
    res = run_pipeline(E, sc.target(), sc.eps(), int(p.get("N", 2)), cfg)
    doc = res.to_json()
    doc["max_error"] = res.audit.max_error
    out.json("pipeline.json", sc, "pipeline run", doc)
    out.json("final.json", sc, "pipeline run", {"function": res.final.to_json()})
    out.write("trace.csv", res.trace_csv())
    t = res.table
    out.write("pipeline.svg", region_svg(E, [(K.raster(), "#1f77b4") for K in res.exhaustion.compacts[1:]],
                                         heat=(t["points"], t["error"]),
                                         title=f"pipeline: {sc.name}  max error {res.audit.max_error:.2e}"))
    print(f"stages {len(res.stages)}  max error {res.audit.max_error:.3e}  pass {res.passed}")
    return 0 if res.passed else 1


def _load_function(out: Outputs) -> tuple[NonCriticalEntire, str]:
    for name in ("final.json", "noncrit.json"):
        path = out.root / name
        if path.exists():
            return NonCriticalEntire.from_json(json.loads(path.read_text())["function"]), name
    raise FileNotFoundError(f"no final.json or noncrit.json in {out.root}; run noncrit or pipeline first")


def cmd_audit(args, sc: Scenario, out: Outputs) -> int:
    F, source = _load_function(out)
    E = sc.region()
    z = np.unique(np.concatenate([sample_set(E, 100.0, seed=sc.seed + 1), E.sample_points()]))
    if source == "final.json":
        # the staged result is only promised on E ∩ K_N
        z = _restrict_to_stage(E, z, int(sc.section("pipeline").get("N", 2)))
    rep = audit_noncritical(F, sc.target(), sc.eps(), z, contours=default_contours(F.window))
    out.json("audit.json", sc, "audit", {"source": source, "audit": rep.to_json()})
    print(f"audit {'PASS' if rep.passed else 'FAIL'}  max error {rep.max_error:.3e}  "
          f"zero counts {rep.zero_counts}")
    return 0 if rep.passed else 1


def _restrict_to_stage(E: Region, z: np.ndarray, N: int) -> np.ndarray:
    model = decompose_semi_admissible(E)
    ex = build_exhaustion(model, N + 2)
    return z[ex.compacts[N].distance(z) == 0]


def cmd_report(args, sc: Scenario, out: Outputs) -> int:
    if not out.root.is_dir():
        raise FileNotFoundError(f"{out.root} does not exist")
    summary = {}
    for path in sorted(out.root.glob("*.json")):
        if path.name == "report.json":
            continue
        doc = json.loads(path.read_text())
        entry = {"command": doc.get("command"), "scenario_sha256": doc.get("stamp", {}).get("scenario_sha256")}
        for key in ("verdicts", "max_error", "pass", "hole_count", "runge", "semi_admissible"):
            if key in doc:
                entry[key] = doc[key]
        if "audit" in doc:
            entry["pass"] = doc["audit"]["pass"]
            entry["max_error"] = doc["audit"]["max_error"]
        if "function" in doc:
            entry["certificate"] = doc["function"].get("certificate")
        summary[path.name] = entry
    stale = sorted(k for k, v in summary.items() if v["scenario_sha256"] not in (None, sc.hash))
    out.json("report.json", sc, "report", {"artifacts": summary, "stale": stale})
    for name, entry in summary.items():
        print(f"{name:24s} {entry.get('command')}")
    return 0


COMMANDS = {"fit": cmd_fit, "noncrit": cmd_noncrit, "audit": cmd_audit, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("scenario", help="scenario JSON file")
    common.add_argument("--out", default=None, help="output directory (default out/<scenario name>)")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--resolution", type=float, default=None, help="override the grid spacing h")
    common.add_argument("--force", action="store_true", help="overwrite existing outputs")
    ap = argparse.ArgumentParser(prog="noncritical", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    topo = sub.add_parser("topo", help="topological checks on the set")
    topo_sub = topo.add_subparsers(dest="which", required=True)
    for w in TOPO_COMMANDS:
        topo_sub.add_parser(w, parents=[common])
    sub.add_parser("fit", parents=[common], help="polynomial fit of the target on the set")
    sub.add_parser("noncrit", parents=[common], help="non-critical entire approximation on the set")
    pipe = sub.add_parser("pipeline", help="staged approximation")
    pipe_sub = pipe.add_subparsers(dest="action", required=True)
    pipe_sub.add_parser("run", parents=[common])
    sub.add_parser("audit", parents=[common], help="audit the function stored in the output directory")
    sub.add_parser("report", parents=[common], help="summarise the output directory")
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        sc = Scenario.load(args.scenario).override(args.seed, args.resolution)
    except ScenarioError as exc:
        print(f"schema error:\n{exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read scenario: {exc}", file=sys.stderr)
        return 2
    out = Outputs(Path(args.out) if args.out else Path("out") / sc.name, args.force)
    if args.command == "topo":
        fn = cmd_topo
    elif args.command == "pipeline":
        fn = cmd_pipeline
    else:
        fn = COMMANDS[args.command]
    try:
        return fn(args, sc, out)
    except OutputExists as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ScenarioError as exc:
        print(f"schema error:\n{exc}", file=sys.stderr)
        return 2
    except NoncriticalError as exc:
        module = ERROR_MODULE.get(type(exc).__name__, "noncritical")
        where = ""
        if isinstance(exc, StageError):
            where = f" (stage {exc.stage}, step {exc.step})"
        print(f"error [{module}] {type(exc).__name__}{where}: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())

