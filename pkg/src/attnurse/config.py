"""Experiment configuration: JSON parsing, defaults and validation.

Example document (every field optional; shown with defaults)::

    {
      "grid": {"height": 16, "width": 16, "channels": 8},
      "entities": 2,
      "background_tokens": 1,
      "steps": 50,
      "seeds": {"start": 0, "count": 100},
      "nurse": {"loss": "com", "lr0": 20.0, "cutoff": 25, "inner_steps": 1, "backtrack": true},
      "formation": {"s_min": 0.05, "tau": 0.5},
      "schedule": {"beta_start": 0.0001, "beta_end": 0.02},
      "denoiser": {"pull": 128.0, "smoothing": 2.0, "key_noise": 0.02},
      "snapshots": [],
      "output": "out"
    }

``"nurse": null`` disables nursing entirely.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .diffusion import ToyConfig
from .errors import ParseError, ValidationError
from .losses import LossKind
from .nursing import NurseConfig

_TOP = {
    "grid", "entities", "background_tokens", "steps", "seeds", "nurse",
    "formation", "schedule", "denoiser", "snapshots", "output",
}
_SECTIONS = {
    "grid": {"height", "width", "channels"},
    "seeds": {"start", "count"},
    "nurse": {"loss", "lr0", "cutoff", "inner_steps", "backtrack"},
    "formation": {"s_min", "tau"},
    "schedule": {"beta_start", "beta_end"},
    "denoiser": {"pull", "smoothing", "key_noise"},
}


@dataclass(frozen=True)
class ExperimentConfig:
    toy: ToyConfig = field(default_factory=ToyConfig)
    seeds: range = range(0, 100)
    nurse: NurseConfig | None = field(default_factory=NurseConfig)
    output: str = "out"


def _int(value, path):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"expected an integer, got {json.dumps(value)}", path)
    return value


def _num(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"expected a number, got {json.dumps(value)}", path)
    return float(value)


def _obj(value, path):
    if not isinstance(value, dict):
        raise ParseError("expected an object", path)
    unknown = sorted(set(value) - _SECTIONS.get(path, _TOP))
    if unknown:
        raise ParseError(f"unknown field(s) {', '.join(unknown)}", path or "<root>")
    return value


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a config document; missing fields take defaults."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg} (line {exc.lineno}, column {exc.colno})") from None
    doc = _obj(doc, "")

    toy = ToyConfig()
    updates: dict = {}
    grid = _obj(doc.get("grid", {}), "grid")
    for key in ("height", "width", "channels"):
        if key in grid:
            updates[key] = _int(grid[key], f"grid.{key}")
    for key in ("entities", "background_tokens", "steps"):
        if key in doc:
            updates[key] = _int(doc[key], key)
    formation = _obj(doc.get("formation", {}), "formation")
    for key in ("s_min", "tau"):
        if key in formation:
            updates[key] = _num(formation[key], f"formation.{key}")
    schedule = _obj(doc.get("schedule", {}), "schedule")
    for key in ("beta_start", "beta_end"):
        if key in schedule:
            updates[key] = _num(schedule[key], f"schedule.{key}")
    denoiser = _obj(doc.get("denoiser", {}), "denoiser")
    for key in ("pull", "smoothing", "key_noise"):
        if key in denoiser:
            updates[key] = _num(denoiser[key], f"denoiser.{key}")
    if "snapshots" in doc:
        snaps = doc["snapshots"]
        if not isinstance(snaps, list):
            raise ParseError("expected a list of step indices", "snapshots")
        updates["snapshots"] = tuple(sorted({_int(v, f"snapshots[{i}]") for i, v in enumerate(snaps)}))
    toy = replace(toy, **updates)

    seeds_doc = _obj(doc.get("seeds", {}), "seeds")
    start = _int(seeds_doc.get("start", 0), "seeds.start")
    count = _int(seeds_doc.get("count", 100), "seeds.count")

    nurse = NurseConfig()
    nurse_doc = doc.get("nurse", {})
    if nurse_doc is None:
        nurse = None
    else:
        nurse_doc = _obj(nurse_doc, "nurse")
        kw: dict = {}
        if "loss" in nurse_doc:
            if not isinstance(nurse_doc["loss"], str):
                raise ParseError("expected a loss name string", "nurse.loss")
            try:
                kw["loss"] = LossKind.parse(nurse_doc["loss"])
            except ValueError as exc:
                raise ParseError(str(exc), "nurse.loss") from None
        if "lr0" in nurse_doc:
            kw["lr0"] = _num(nurse_doc["lr0"], "nurse.lr0")
        if "cutoff" in nurse_doc:
            kw["cutoff"] = _int(nurse_doc["cutoff"], "nurse.cutoff")
        if "inner_steps" in nurse_doc:
            kw["inner_steps"] = _int(nurse_doc["inner_steps"], "nurse.inner_steps")
        if "backtrack" in nurse_doc:
            if not isinstance(nurse_doc["backtrack"], bool):
                raise ParseError("expected true or false", "nurse.backtrack")
            kw["backtrack"] = nurse_doc["backtrack"]
        nurse = replace(nurse, **kw)

    output = doc.get("output", "out")
    if not isinstance(output, str) or not output:
        raise ParseError("expected a non-empty path string", "output")

    cfg = ExperimentConfig(toy=toy, seeds=range(start, start + max(count, 0)), nurse=nurse, output=output)
    violations = validate(cfg, count)
    if violations:
        raise ValidationError(violations)
    return cfg


def validate(cfg: ExperimentConfig, count: int | None = None) -> list[tuple[str, str]]:
    """Every rule violation as ``(field path, message)``."""
    toy = cfg.toy
    out: list[tuple[str, str]] = []
    for path, value in (
        ("grid.height", toy.height),
        ("grid.width", toy.width),
        ("grid.channels", toy.channels),
        ("steps", toy.steps),
    ):
        if value < 1:
            out.append((path, f"must be >= 1, got {value}"))
    if toy.entities < 2:
        out.append(("entities", f"overlap metrics need >= 2 entities, got {toy.entities}"))
    if toy.background_tokens < 0:
        out.append(("background_tokens", f"must be >= 0, got {toy.background_tokens}"))
    if not 0 < toy.beta_start <= toy.beta_end < 1:
        out.append(("schedule", f"need 0 < beta_start <= beta_end < 1, got {toy.beta_start}, {toy.beta_end}"))
    if not 0 < toy.s_min <= 1:
        out.append(("formation.s_min", f"must lie in (0, 1], got {toy.s_min}"))
    if not 0 < toy.tau < 1:
        out.append(("formation.tau", f"must lie in (0, 1), got {toy.tau}"))
    for path, value in (("denoiser.pull", toy.pull), ("denoiser.smoothing", toy.smoothing), ("denoiser.key_noise", toy.key_noise)):
        if value < 0:
            out.append((path, f"must be >= 0, got {value}"))
    for k in toy.snapshots:
        if not 0 <= k < toy.steps:
            out.append(("snapshots", f"step {k} outside 0..{toy.steps - 1}"))
    n_seeds = len(cfg.seeds) if count is None else count
    if n_seeds < 1:
        out.append(("seeds.count", f"must be >= 1, got {n_seeds}"))
    if cfg.seeds.start < 0:
        out.append(("seeds.start", f"must be >= 0, got {cfg.seeds.start}"))
    if cfg.nurse is not None:
        nc = cfg.nurse
        if nc.lr0 < 0:
            out.append(("nurse.lr0", f"must be >= 0, got {nc.lr0}"))
        if nc.cutoff < 0:
            out.append(("nurse.cutoff", f"must be >= 0, got {nc.cutoff}"))
        if nc.cutoff > toy.steps:
            out.append(("nurse.cutoff", f"cutoff {nc.cutoff} exceeds steps {toy.steps}"))
        if nc.inner_steps < 1:
            out.append(("nurse.inner_steps", f"must be >= 1, got {nc.inner_steps}"))
        if nc.loss.min_entities > toy.entities:
            out.append(("nurse.loss", f"{nc.loss} needs >= {nc.loss.min_entities} entities"))
    return out


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        return parse_config(fh.read())
