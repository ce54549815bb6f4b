"""Scenario files: schema, loading, validation and serialization.

Scenario files are YAML. Vertices are numbered from 1 in files (as in the
figures they reproduce) and from 0 in memory. A minimal file::

    name: fig2
    n: 5
    edges:            # [tail, head, weight]; head is an out-neighbor of tail
      - [1, 2, 1.0]
      - [2, 3, 1.0]
    x0: [-1, 0, 2, 2, 1]
    sigma: 0.999      # scalar or one value per agent
    horizon: 50

Optional keys: ``epsilon`` (list), ``mode`` (``event-driven``,
``periodic-event``, ``periodic-laplacian``), ``h``, ``cooldown``,
``sample_dt``, ``zeno_ceiling``, ``allow_unbalanced``, ``output``, and
``switching`` in place of ``edges``::

    switching:
      repeat_every: 2.0
      schedule:
        - {t: 0.0, edges: [[1, 2, 1.0], [2, 1, 1.0]]}
        - {t: 1.0, edges: [[2, 3, 1.0], [3, 2, 1.0]]}
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from importlib import resources
import math
from pathlib import Path
import warnings

import numpy as np
import yaml

from .graph import (
    GraphError,
    WeightedDigraph,
    balance_defect,
    is_weight_balanced,
    union,
    unreachable_pair,
)
from .triggers import TriggerParams

MODES = ("event-driven", "periodic-event", "periodic-laplacian")

_KNOWN_KEYS = {
    "name", "n", "edges", "switching", "x0", "sigma", "epsilon", "horizon", "mode", "h",
    "cooldown", "sample_dt", "zeno_ceiling", "allow_unbalanced", "output",
}


class ScenarioError(ValueError):
    """The file does not parse or does not follow the schema."""


class ValidationError(ValueError):
    """The scenario parses but violates a model invariant."""


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    schedule: tuple[tuple[float, WeightedDigraph], ...]
    x0: tuple[float, ...]
    sigma: float | tuple[float, ...]
    horizon: float
    mode: str = "event-driven"
    h: float | None = None
    epsilon: tuple[float, ...] | None = None
    repeat_every: float | None = None
    cooldown: bool = True
    sample_dt: float = 0.01
    zeno_ceiling: float = 10_000.0
    allow_unbalanced: bool = False
    output: str | None = None
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.schedule:
            raise ScenarioError("scenario needs a graph")
        object.__setattr__(self, "x0", tuple(float(v) for v in self.x0))
        if not isinstance(self.sigma, (int, float)):
            object.__setattr__(self, "sigma", tuple(float(v) for v in self.sigma))
        else:
            object.__setattr__(self, "sigma", float(self.sigma))
        if self.epsilon is not None:
            object.__setattr__(self, "epsilon", tuple(float(v) for v in self.epsilon))
        n = self.n
        if len(self.x0) != n:
            raise ScenarioError(f"x0 has {len(self.x0)} entries but the graph has {n} vertices")
        if isinstance(self.sigma, tuple) and len(self.sigma) != n:
            raise ScenarioError(f"sigma has {len(self.sigma)} entries, expected {n}")
        if self.epsilon is not None and len(self.epsilon) != n:
            raise ScenarioError(f"epsilon has {len(self.epsilon)} entries, expected {n}")
        if self.mode not in MODES:
            raise ScenarioError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        if self.mode != "event-driven" and self.h is None:
            raise ScenarioError(f"mode {self.mode} needs a sampling period h")
        if self.h is not None and not (self.h > 0 and math.isfinite(self.h)):
            raise ScenarioError(f"h must be positive, got {self.h}")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ScenarioError(f"horizon must be positive, got {self.horizon}")
        if not self.sample_dt > 0:
            raise ScenarioError("sample_dt must be positive")
        times = [t for t, _ in self.schedule]
        if times[0] != 0.0:
            raise ScenarioError("switching schedule must start at t = 0")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ScenarioError("switching schedule times must be strictly increasing")
        if any(g.n != n for _, g in self.schedule):
            raise ScenarioError("all graphs in a switching schedule need the same vertex count")
        if self.repeat_every is not None and not self.repeat_every > times[-1]:
            raise ScenarioError("repeat_every must exceed the last schedule time")

    @property
    def n(self) -> int:
        return self.schedule[0][1].n

    @property
    def graph(self) -> WeightedDigraph:
        return self.schedule[0][1]

    @property
    def graphs(self) -> list[WeightedDigraph]:
        return [g for _, g in self.schedule]

    @property
    def is_switching(self) -> bool:
        return len(self.schedule) > 1

    def trigger_params(self) -> TriggerParams:
        return TriggerParams.build(self.graphs, self.sigma, self.epsilon)

    def with_overrides(self, **kw) -> ScenarioConfig:
        kw = {k: v for k, v in kw.items() if v is not None}
        return replace(self, **kw)


def validate_scenario(cfg: ScenarioConfig) -> list[str]:
    """Check graph and trigger invariants; returns warnings, raises ValidationError.

    Unbalanced graphs are an error unless ``cfg.allow_unbalanced`` is set,
    in which case they produce a warning.
    """
    notes = []
    for t, g in cfg.schedule:
        if not is_weight_balanced(g):
            v = int(np.argmax(np.abs(balance_defect(g))))
            d_out = g.adjacency[v].sum()
            d_in = g.adjacency[:, v].sum()
            msg = (f"graph active at t={t:g} is not weight-balanced: vertex {v + 1} has "
                   f"out-degree {d_out:.6g} but in-degree {d_in:.6g}")
            if not cfg.allow_unbalanced:
                raise ValidationError(msg)
            notes.append(msg)
    joint = union(cfg.graphs)
    pair = unreachable_pair(joint)
    if pair is not None:
        a, b = pair
        what = "graph" if not cfg.is_switching else "union of the switching graphs"
        raise ValidationError(f"{what} is not strongly connected: no path from vertex {a + 1} to vertex {b + 1}")
    try:
        cfg.trigger_params()
    except ValueError as exc:
        raise ValidationError(str(exc)) from None
    return notes


def _parse_edges(raw, n, where) -> WeightedDigraph:
    if not isinstance(raw, list) or not raw:
        raise ScenarioError(f"{where}: expected a non-empty list of [tail, head, weight]")
    edges = []
    for k, e in enumerate(raw):
        if not (isinstance(e, (list, tuple)) and len(e) in (2, 3)):
            raise ScenarioError(f"{where}[{k}]: expected [tail, head] or [tail, head, weight], got {e!r}")
        i, j = e[0], e[1]
        w = e[2] if len(e) == 3 else 1.0
        if not (isinstance(i, int) and isinstance(j, int)):
            raise ScenarioError(f"{where}[{k}]: vertex ids must be integers, got {e!r}")
        if not (1 <= i <= n and 1 <= j <= n):
            raise ScenarioError(f"{where}[{k}]: vertex ids must lie in 1..{n}, got {e!r}")
        w = _number(w, f"{where}[{k}] weight")
        if i == j:
            raise ValidationError(f"{where}[{k}]: self-loop at vertex {i}")
        if not w > 0:
            raise ValidationError(f"{where}[{k}]: edge ({i}, {j}) has non-positive weight {w:g}")
        if any(a == i - 1 and b == j - 1 for a, b, _ in edges):
            raise ValidationError(f"{where}[{k}]: duplicate edge ({i}, {j})")
        edges.append((i - 1, j - 1, w))
    try:
        return WeightedDigraph(n, tuple(edges))
    except GraphError as exc:
        raise ValidationError(f"{where}: {exc}") from None


def _number(v, what) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ScenarioError(f"{what}: expected a number, got {v!r}")
    return float(v)


def _numbers(v, what) -> tuple[float, ...]:
    if not isinstance(v, list):
        raise ScenarioError(f"{what}: expected a list of numbers, got {v!r}")
    return tuple(_number(a, f"{what}[{k}]") for k, a in enumerate(v))


def scenario_from_dict(doc: dict, source: str | None = None) -> ScenarioConfig:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a mapping at top level")
    unknown = set(doc) - _KNOWN_KEYS
    if unknown:
        raise ScenarioError(f"unknown field(s): {', '.join(sorted(unknown))}")
    for key in ("n", "x0", "sigma", "horizon"):
        if key not in doc:
            raise ScenarioError(f"missing required field '{key}'")
    n = doc["n"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ScenarioError(f"n: expected a positive integer, got {n!r}")
    if ("edges" in doc) == ("switching" in doc):
        raise ScenarioError("give exactly one of 'edges' or 'switching'")
    repeat = None
    if "edges" in doc:
        schedule = ((0.0, _parse_edges(doc["edges"], n, "edges")),)
    else:
        sw = doc["switching"]
        if not isinstance(sw, dict) or "schedule" not in sw:
            raise ScenarioError("switching: expected a mapping with a 'schedule' list")
        extra = set(sw) - {"schedule", "repeat_every"}
        if extra:
            raise ScenarioError(f"switching: unknown field(s): {', '.join(sorted(extra))}")
        entries = []
        for k, item in enumerate(sw["schedule"] or []):
            if not isinstance(item, dict) or set(item) != {"t", "edges"}:
                raise ScenarioError(f"switching.schedule[{k}]: expected {{t: ..., edges: [...]}}")
            entries.append((_number(item["t"], f"switching.schedule[{k}].t"),
                            _parse_edges(item["edges"], n, f"switching.schedule[{k}].edges")))
        schedule = tuple(entries)
        if sw.get("repeat_every") is not None:
            repeat = _number(sw["repeat_every"], "switching.repeat_every")
    sigma = doc["sigma"]
    sigma = _numbers(sigma, "sigma") if isinstance(sigma, list) else _number(sigma, "sigma")
    eps = doc.get("epsilon")
    eps = None if eps is None else _numbers(eps, "epsilon")
    h = doc.get("h")
    kw = {}
    for key in ("cooldown", "allow_unbalanced"):
        if key in doc:
            if not isinstance(doc[key], bool):
                raise ScenarioError(f"{key}: expected true or false")
            kw[key] = doc[key]
    for key in ("sample_dt", "zeno_ceiling"):
        if key in doc:
            kw[key] = _number(doc[key], key)
    if doc.get("output") is not None:
        kw["output"] = str(doc["output"])
    mode = doc.get("mode", "event-driven")
    return ScenarioConfig(
        name=str(doc.get("name", Path(source).stem if source else "scenario")),
        schedule=schedule,
        x0=_numbers(doc["x0"], "x0"),
        sigma=sigma,
        horizon=_number(doc["horizon"], "horizon"),
        mode=mode,
        h=None if h is None else _number(h, "h"),
        epsilon=eps,
        repeat_every=repeat,
        source=source,
        **kw,
    )


def bundled_scenarios() -> list[str]:
    root = resources.files("etconsensus") / "scenarios"
    return sorted(p.name for p in root.iterdir() if p.name.endswith(".scenario"))


def resolve_scenario_path(path) -> Path:
    """A path on disk, or the name of a bundled scenario such as ``fig2.scenario``."""
    p = Path(path)
    if p.exists():
        return p
    name = p.name if p.suffix else p.name + ".scenario"
    bundled = resources.files("etconsensus") / "scenarios" / name
    if bundled.is_file():
        return Path(str(bundled))
    raise FileNotFoundError(f"no scenario file {path}")


def parse_scenario(text: str, source: str | None = None, validate: bool = True) -> ScenarioConfig:
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        where = f"line {mark.line + 1}, column {mark.column + 1}" if mark else "unknown position"
        raise ScenarioError(f"{source or 'scenario'}: {where}: {exc.problem}") from None
    cfg = scenario_from_dict(doc, source)
    if validate:
        for msg in validate_scenario(cfg):
            warnings.warn(msg, stacklevel=2)
    return cfg


def load_scenario(path, validate: bool = True, allow_unbalanced: bool | None = None) -> ScenarioConfig:
    p = resolve_scenario_path(path)
    cfg = parse_scenario(p.read_text(), str(p), validate=False)
    if allow_unbalanced is not None:
        cfg = replace(cfg, allow_unbalanced=allow_unbalanced)
    if validate:
        for msg in validate_scenario(cfg):
            warnings.warn(msg, stacklevel=2)
    return cfg


def _edges_out(g: WeightedDigraph):
    return [[i + 1, j + 1, w] for i, j, w in g.edges]


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    doc: dict = {"name": cfg.name, "n": cfg.n}
    if cfg.is_switching or cfg.repeat_every is not None:
        sw: dict = {"schedule": [{"t": t, "edges": _edges_out(g)} for t, g in cfg.schedule]}
        if cfg.repeat_every is not None:
            sw["repeat_every"] = cfg.repeat_every
        doc["switching"] = sw
    else:
        doc["edges"] = _edges_out(cfg.graph)
    doc["x0"] = list(cfg.x0)
    doc["sigma"] = list(cfg.sigma) if isinstance(cfg.sigma, tuple) else cfg.sigma
    if cfg.epsilon is not None:
        doc["epsilon"] = list(cfg.epsilon)
    doc["horizon"] = cfg.horizon
    doc["mode"] = cfg.mode
    if cfg.h is not None:
        doc["h"] = cfg.h
    doc["cooldown"] = cfg.cooldown
    doc["sample_dt"] = cfg.sample_dt
    doc["zeno_ceiling"] = cfg.zeno_ceiling
    doc["allow_unbalanced"] = cfg.allow_unbalanced
    if cfg.output is not None:
        doc["output"] = cfg.output
    return doc


class _FlowListDumper(yaml.SafeDumper):
    pass


def _represent_list(dumper, data):
    flow = all(not isinstance(v, (list, dict)) for v in data)
    return dumper.represent_sequence("tag:yaml.org,2002:seq", data, flow_style=flow)


_FlowListDumper.add_representer(list, _represent_list)


def dump_scenario(cfg: ScenarioConfig) -> str:
    # floats go through repr(), which round-trips doubles exactly
    return yaml.dump(scenario_to_dict(cfg), Dumper=_FlowListDumper, sort_keys=False)


def write_scenario(cfg: ScenarioConfig, path) -> Path:
    p = Path(path)
    p.write_text(dump_scenario(cfg))
    return p
