import json
from pathlib import Path

import numpy as np
import pytest

from noncritical.scenario import Scenario, ScenarioError
from noncritical.targets import (
    Piecewise,
    TargetConfigError,
    eps_from_json,
    smooth_step,
    target_from_json,
)

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"
WIN = (-4.0, -4.0, 4.0, 4.0)


@pytest.mark.parametrize("path", sorted(SCENARIOS.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_scenarios_validate(path):
    sc = Scenario.load(path)
    assert sc.name == path.stem
    R = sc.region()
    assert R.window == sc.window and R.h == sc.resolution
    z = np.array([0.1 + 0.1j])
    if "target" not in sc.data:
        with pytest.raises(ScenarioError):
            sc.target()
        return
    assert np.isfinite(sc.target()(z)).all() and sc.eps()(z)[0] > 0


def test_hash_ignores_formatting():
    a = Scenario.parse('{"name":"a","seed":0,"set":{"fixture":"annulus"},"target":{"kind":"exp"},"eps":0.1}')
    b = Scenario.parse('{\n "eps": 0.1, "target": {"kind": "exp"},\n "set": {"fixture": "annulus"},'
                       ' "seed": 0, "name": "a"}')
    assert a.hash == b.hash


def test_missing_seed_is_rejected():
    with pytest.raises(ScenarioError) as exc:
        Scenario.parse('{"name": "a", "set": {"fixture": "annulus"}, "target": {"kind": "exp"}, "eps": 0.1}')
    assert "seed" in str(exc.value)


def test_unknown_target_kind_is_rejected_by_schema():
    doc = {"name": "a", "seed": 0, "set": {"fixture": "annulus"}, "target": {"kind": "gamma"}, "eps": 0.1}
    with pytest.raises(ScenarioError) as exc:
        Scenario.parse(json.dumps(doc, indent=1))
    assert "target" in str(exc.value)


def test_target_builtins():
    z = np.array([0.3 - 0.2j, 1.1 + 0.5j])
    np.testing.assert_allclose(target_from_json({"kind": "identity"})(z), z)
    p = target_from_json({"kind": "polynomial", "coeffs": [1, [0, 2], 3], "center": [1, 0]})
    np.testing.assert_allclose(p(z), 1 + 2j * (z - 1) + 3 * (z - 1) ** 2)
    np.testing.assert_allclose(p.derivative(z), 2j + 6 * (z - 1))
    e = target_from_json({"kind": "exp", "a": 2, "c": 0.5})
    np.testing.assert_allclose(e(z), 0.5 * np.exp(2 * z))
    s = target_from_json({"kind": "affine_sin", "a": 1, "c": 0.3})
    np.testing.assert_allclose(s.derivative(z), 1 + 0.3 * np.cos(z))
    with pytest.raises(TargetConfigError):
        target_from_json({"kind": "gamma"})


def test_eps_profiles():
    assert eps_from_json(0.2)(np.zeros(3)).tolist() == [0.2] * 3
    r = eps_from_json({"kind": "radial", "knots": [[2, 0.1], [0, 0.5]]})
    np.testing.assert_allclose(r(np.array([0, 1, 5])), [0.5, 0.3, 0.1])
    with pytest.raises(TargetConfigError):
        eps_from_json({"kind": "constant", "value": 0})


def test_smooth_step_profile():
    t = np.linspace(-1, 2, 301)
    v = smooth_step(t)
    assert v[t <= 0].min() == 1 and v[t >= 1].max() == 0
    assert np.all(np.diff(v) <= 0)
    np.testing.assert_allclose(smooth_step(0.5), 0.5)
    np.testing.assert_allclose(smooth_step(t[(t > 0) & (t < 1)]) + smooth_step(1 - t[(t > 0) & (t < 1)]), 1)


def test_piecewise_is_exact_near_pieces_and_continuous():
    sc = Scenario.load(SCENARIOS / "two_discs_arc.json")
    f = sc.target()
    assert isinstance(f, Piecewise)
    left = np.array([-1.2 + 0.6j, -1.5 + 0j])
    np.testing.assert_array_equal(f(left), np.exp(left))
    np.testing.assert_array_equal(f(np.array([1.2 + 0.65j])), 1.001 * np.exp(np.array([1.2 + 0.65j])))
    t = np.linspace(np.pi - 0.3, 0.3, 4001)
    arc = 1.25 * np.exp(1j * t)
    v = f(arc)
    assert np.abs(np.diff(v)).max() < 1e-2
    assert np.isnan(f.derivative(np.array([1.25j]))).all()
