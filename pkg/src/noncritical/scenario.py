"""Scenario files: schema, validation with line/field diagnostics, and construction."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass
from importlib import resources

import jsonschema

from . import fixtures
from .errors import NoncriticalError
from .planar_sets import Region, shape_from_json
from .targets import eps_from_json, target_from_json


class ScenarioError(NoncriticalError, ValueError):
    """Invalid scenario file; the message carries line and field."""


def load_schema() -> dict:
    return json.loads(resources.files("noncritical").joinpath("scenario.schema.json").read_text())


FIXTURES = {
    "disc_chain": lambda h, w, p: fixtures.disc_chain(h, w, p.get("n_max")),
    "tangent_discs": lambda h, w, p: fixtures.tangent_discs(h, w),
    "annulus": lambda h, w, p: fixtures.annulus(p.get("r_in", 1.0), p.get("r_out", 2.0), h, w),
    "segment": lambda h, w, p: fixtures.segment(_cx(p.get("a", -1)), _cx(p.get("b", 1)), h, w),
    "oscillating_graph": lambda h, w, p: fixtures.oscillating_graph(h, w, p.get("u_max", 40.0),
                                                                    p.get("du", 0.005)),
    "two_discs_with_arc": lambda h, w, p: fixtures.two_discs_with_arc(
        h, w, p.get("offset", 1.5), p.get("radius", 0.5), p.get("arc_radius", 1.6)),
    "square": lambda h, w, p: fixtures.square(p.get("side", 1.0), h, w),
}


def _cx(v) -> complex:
    return complex(v[0], v[1]) if isinstance(v, (list, tuple)) else complex(v)


def _line_of(text: str, path) -> int | None:
    """Best-effort line of the JSON node at ``path`` (keys searched in order)."""
    pos = 0
    for key in path:
        if isinstance(key, int):
            continue
        k = text.find(json.dumps(key), pos)
        if k < 0:
            break
        pos = k
    return text.count("\n", 0, pos) + 1 if path else 1


def _field(path) -> str:
    out = ""
    for key in path:
        out += f"[{key}]" if isinstance(key, int) else (f".{key}" if out else str(key))
    return out or "<root>"


@dataclass(frozen=True)
class Scenario:
    data: dict
    source: str = "<memory>"

    @classmethod
    def parse(cls, text: str, source: str = "<memory>") -> "Scenario":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc
        validator = jsonschema.Draft202012Validator(load_schema())
        errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
        if errors:
            lines = [f"{source}:{_line_of(text, list(e.absolute_path))}: {_field(list(e.absolute_path))}: {e.message}"
                     for e in errors]
            raise ScenarioError("\n".join(lines))
        return cls(data, source)

    @classmethod
    def load(cls, path) -> "Scenario":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read(), str(path))

    def override(self, seed: int | None = None, resolution: float | None = None) -> "Scenario":
        d = copy.deepcopy(self.data)
        if seed is not None:
            d["seed"] = int(seed)
        if resolution is not None:
            d["resolution"] = float(resolution)
        return Scenario(d, self.source)

    @property
    def name(self) -> str:
        return self.data.get("name", "scenario")

    @property
    def seed(self) -> int:
        return int(self.data["seed"])

    @property
    def window(self) -> tuple:
        return tuple(float(v) for v in self.data.get("window", fixtures.DEFAULT_WINDOW))

    @property
    def resolution(self) -> float:
        return float(self.data.get("resolution", 0.02))

    @property
    def hash(self) -> str:
        blob = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def stamp(self) -> dict:
        return {"scenario": self.name, "scenario_sha256": self.hash, "window": list(self.window),
                "resolution": self.resolution, "seed": self.seed}

    def section(self, key: str) -> dict:
        return dict(self.data.get(key, {}))

    def region(self) -> Region:
        conf = self.data["set"]
        h, w = self.resolution, self.window
        if "fixture" in conf:
            return FIXTURES[conf["fixture"]](h, w, conf.get("params", {}))
        shapes = tuple(shape_from_json(s, w, h) for s in conf["shapes"])
        return Region(shapes, w, h)

    def shapes(self, key: str) -> Region | None:
        if key not in self.data:
            return None
        return Region(tuple(shape_from_json(s, self.window, self.resolution) for s in self.data[key]),
                      self.window, self.resolution)

    def probes(self) -> list | None:
        if "probes" not in self.data:
            return None
        return [Region((shape_from_json(s, self.window, self.resolution),), self.window, self.resolution)
                for s in self.data["probes"]]

    def _require(self, key: str):
        if key not in self.data:
            raise ScenarioError(f"{self.source}: {key}: required by this command")
        return self.data[key]

    def target(self):
        return target_from_json(self._require("target"), self.window, self.resolution)

    def eps(self):
        return eps_from_json(self._require("eps"))
