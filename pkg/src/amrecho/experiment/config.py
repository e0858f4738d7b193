"""Run configuration: JSON document, schema validation and defaults."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Any, Optional

import jsonschema

from ..errors import AMRError, ConfigParseError, ConfigValidationError

DEFAULTS: dict[str, Any] = {
    "params": {
        "g": 1.0,
        "gamma": 1e-5,
        "L": 1.0,
        "delta1": 20.0,
        "delta2": None,
        "delta21": 1.8,
        "kappa_slope": 0.0,
        "omega_ref": None,
    },
    "controls": {
        "omega1": 6.0,
        "omega_r": 6.0,
        "edge": 20.0,
        "write_hold": 150.0,
        "dark": 20.0,
        "echo_lead": None,
        "read_tail": 180.0,
        "pi_pulses": False,
    },
    "schedule": None,
    "ensemble": {
        "kind": "gaussian",
        "width": 1.0,
        "center": 0.0,
        "support": None,
        "file": None,
        "M": 256,
        "panels": 8,
    },
    "grid": {"dt_max": 0.32, "m_slices": 256},
    "solver": "spectral",
    "mode": "three-level",
    "noise_injection": 0.0,
    "outputs": {"dir": "amrecho-out", "formats": ["csv", "json", "dat"]},
    "sweep": None,
}

DEMO = {"depth": 30.0, "input": {"pulses": [{"kind": "gaussian", "width": 56.0, "center": 420.0, "amplitude": 1.0}]}}


def _schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("schema.json").read_text())


@dataclass(frozen=True)
class RunConfig:
    depth: float
    input: dict
    params: dict
    controls: dict
    schedule: Optional[dict]
    ensemble: dict
    grid: dict
    solver: str
    mode: str
    noise_injection: float
    outputs: dict
    sweep: Optional[dict]

    def to_dict(self) -> dict:
        return {f.name: copy.deepcopy(getattr(self, f.name)) for f in fields(self)}

    def dumps(self) -> str:
        """Canonical text: sorted keys, two-space indent, trailing newline."""
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def with_value(self, path: str, value) -> "RunConfig":
        """Copy with one dotted-path entry replaced (used by sweeps)."""
        d = self.to_dict()
        keys = path.split(".")
        node = d
        for k in keys[:-1]:
            if not isinstance(node.get(k), dict):
                raise ConfigValidationError(f"sweep parameter {path!r} does not name a config field")
            node = node[k]
        if keys[-1] not in node:
            raise ConfigValidationError(f"sweep parameter {path!r} does not name a config field")
        node[keys[-1]] = value
        return from_dict(d, check=False)


def _merge(defaults: dict, given: dict) -> dict:
    out = copy.deepcopy(defaults)
    for k, v in given.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _normalise_input(inp: dict) -> dict:
    if "pulses" in inp:
        pulses = inp["pulses"]
    else:
        width = float(inp["width"])
        center = inp.get("center")
        pulses = [{"width": width, "center": 7.5 * width if center is None else float(center),
                   "amplitude": inp.get("amplitude", 1.0)}]
    out = []
    for p in pulses:
        q = {"kind": "gaussian", "amplitude": 1.0}
        q.update(p)
        q["width"] = float(q["width"])
        q["center"] = float(q["center"])
        a = q["amplitude"]
        q["amplitude"] = [float(a[0]), float(a[1])] if isinstance(a, list) else float(a)
        out.append(q)
    return {"pulses": out}


def from_dict(doc: dict, check: bool = True) -> RunConfig:
    """Validate against the schema, fill defaults and (optionally) check the
    physical invariants by building the scenario."""
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigValidationError(f"schema violation at {where}: {exc.message}", stage="config") from None
    merged = _merge(DEFAULTS, {k: v for k, v in doc.items() if k not in ("depth", "input")})
    cfg = RunConfig(depth=float(doc["depth"]), input=_normalise_input(doc["input"]), **merged)
    if check:
        validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    """Build every protocol object once; module errors become validation errors."""
    from .scenario import build_scenario

    try:
        build_scenario(cfg)
    except ConfigValidationError:
        raise
    except (AMRError, ValueError) as exc:
        raise ConfigValidationError(str(exc), stage="config") from exc


def parse_config(text: str, source: str = "<string>") -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParseError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}", stage="config") from None
    if not isinstance(doc, dict):
        raise ConfigParseError(f"{source}: top level must be an object", stage="config")
    return from_dict(doc)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc.strerror}", stage="config") from None
    return parse_config(text, str(path))


def demo_config() -> RunConfig:
    return from_dict(DEMO, check=False)
