import copy
import math
from pathlib import Path

import numpy as np
import pytest

from noncritical import fixtures
from noncritical.approx_engine import sample_set, telescoping_budget
from noncritical.errors import ResolutionError, StageError
from noncritical.pipeline import PipelineConfig, bump, final_bound, run_pipeline, stage_step
from noncritical.planar_sets import Disc, Region
from noncritical.scenario import Scenario
from noncritical.set_topology import build_exhaustion, decompose_semi_admissible
from noncritical.targets import Polynomial

WIN = fixtures.DEFAULT_WINDOW
SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


# bump ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def chi():
    U1 = Region((Disc(0, 2.0),), WIN, 0.02)
    U2 = Region((Disc(0, 1.0),), WIN, 0.02)
    return bump(U1, U2)


def test_bump_one_on_inner_set(chi, rng):
    z = 0.99 * np.sqrt(rng.uniform(0, 1, 200)) * np.exp(2j * np.pi * rng.uniform(0, 1, 200))
    assert np.all(chi(z) == 1)


def test_bump_zero_off_outer_set(chi, rng):
    z = rng.uniform(2.0, 3.9, 200) * np.exp(2j * np.pi * rng.uniform(0, 1, 200))
    assert np.all(chi(z) == 0)


def test_bump_monotone_along_ray(chi):
    t = np.linspace(1.0, 2.0, 401)
    v = chi(t * np.exp(0.7j))
    assert 0 < chi(1.5 + 0j) < 1
    assert np.all(np.diff(v) <= 0)
    # the C∞ profile is flat to rounding near both ends, strictly decreasing in between
    mid = (t > 1.1) & (t < 1.9)
    assert np.all(np.diff(v[mid]) < 0)


def test_bump_rejects_thin_gap():
    U1 = Region((Disc(0, 1.01),), WIN, 0.02)
    U2 = Region((Disc(0, 1.0),), WIN, 0.02)
    with pytest.raises(ResolutionError):
        bump(U1, U2)


# final bound -----------------------------------------------------------------------

def test_final_bound_geometric_sum():
    L = telescoping_budget([100.0] * 6, [1.0] * 6)
    b = final_bound(L, 0j, 1)
    assert b == pytest.approx(sum(2.0 ** (-k - 1) for k in range(6)))
    assert b < 1


def test_final_bound_late_entry():
    eps = [1.0, 0.8, 0.5, 0.4, 0.3]
    L = telescoping_budget([100.0] * 5, eps)
    for n in range(1, 5):
        assert final_bound(L, None, n) <= eps[n - 1]


# runs ---------------------------------------------------------------------------

def run_scenario(name):
    sc = Scenario.load(SCENARIOS / f"{name}.json")
    p = sc.section("pipeline")
    cfg = PipelineConfig(seed=sc.seed, **{k: v for k, v in p.items() if k != "N"})
    return run_pipeline(sc.region(), sc.target(), sc.eps(), int(p.get("N", 2)), cfg)


@pytest.fixture(scope="module")
def identity_run():
    return run_scenario("identity")


@pytest.fixture(scope="module")
def e1_run():
    return run_scenario("e1")


@pytest.fixture(scope="module")
def arc_run():
    return run_scenario("two_discs_arc")


def test_identity_survives(identity_run):
    r = identity_run
    assert r.passed
    assert r.audit.max_error < 1e-12
    assert r.audit.zero_counts == [0, 0, 0, 0]


def test_e1_exp(e1_run):
    r = e1_run
    assert r.passed and r.audit.max_error < 0.1
    for t in r.trace:
        assert max(t["third_fit"], t["third_shift"], t["third_rebuild"]) < t["eps_tilde_prev"] / 3
        assert t["cond3_exact"]


def test_bound_dominates_audited_error(e1_run, arc_run):
    for r in (e1_run, arc_run):
        t = r.table
        assert np.all(t["error"] <= t["bound"])
        assert np.all(t["bound"] < t["eps"])


def test_two_discs_arc_conditions_per_stage(arc_run):
    r = arc_run
    assert r.passed and len(r.trace) == 3
    for t in r.trace:
        assert t["cond2"] < t["eps_tilde_prev"]
        assert t["cond3_exact"] and t["cond3_samples"] > 0
        assert t["third_sum"] < t["eps_tilde_prev"]


def test_trace_csv_has_a_row_per_stage(e1_run):
    lines = e1_run.trace_csv().splitlines()
    assert lines[0].startswith("n,") and len(lines) == 1 + len(e1_run.trace)


def test_hard_mismatch_fails_at_fit():
    sc = Scenario.load(SCENARIOS / "two_discs_arc.json")
    doc = copy.deepcopy(sc.data)
    doc["target"]["pieces"][1]["target"]["c"] = 1.05
    sc = Scenario(doc, sc.source)
    p = sc.section("pipeline")
    cfg = PipelineConfig(seed=sc.seed, **{k: v for k, v in p.items() if k != "N"})
    with pytest.raises(StageError) as exc:
        run_pipeline(sc.region(), sc.target(), sc.eps(), int(p["N"]), cfg)
    assert exc.value.stage == 1 and exc.value.step == "b"


def test_pipeline_refuses_tangent_discs():
    with pytest.raises(StageError) as exc:
        run_pipeline(fixtures.tangent_discs(), Polynomial((0, 1)), 0.1, 1)
    assert exc.value.stage == 0


def test_stage_relocates_critical_point_on_arc():
    E = fixtures.two_discs_with_arc(offset=1.2, radius=0.4, arc_radius=1.25)
    c = 1.25j  # top of the arc
    f = Polynomial((c * c, -2 * c, 1))  # f′ vanishes only at c
    model = decompose_semi_admissible(E)
    ex = build_exhaustion(model, 3)
    cfg = PipelineConfig()
    et = 0.05
    state, _, _ = stage_step(1, model, ex, f, et, cfg, None, [], sample_set(E, cfg.density))
    rec = state.record
    assert rec["relocated"] == 1 and 0 < rec["t0_abs"]
    assert all(t < et / 3 for t in state.thirds)
    assert rec["cond2"] < et and rec["cond3_exact"]
    assert math.isfinite(rec["third_sum"])
