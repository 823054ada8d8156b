"""Experiment configuration: YAML file validated against a JSON schema."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import numpy as np
import yaml

from .lattice import Field, GridSpec
from .solver import SolverConfig
from .symbolic import TrilinearSymbol, parse_symbol, read_symbol_file

_NUM = {"type": "number"}
_PAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["symbol", "grid", "data"],
    "properties": {
        "symbol": {"oneOf": [
            {"type": "string", "minLength": 1},
            {"type": "object", "additionalProperties": False, "required": ["table"],
             "properties": {"table": {"type": "string"}}},
        ]},
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string"},
        "grid": {
            "type": "object", "additionalProperties": False,
            "required": ["num_points", "circumference"],
            "properties": {"num_points": {"type": "integer", "minimum": 2},
                           "circumference": {"type": "number", "exclusiveMinimum": 0}},
        },
        "solver": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "dt": {"type": "number", "exclusiveMinimum": 0},
                "horizon": {"type": "number", "exclusiveMinimum": 0},
                "snapshot_every": {"type": "number", "exclusiveMinimum": 0},
                "band": _PAIR,
                "dense": {"oneOf": [{"type": "boolean"}, _PAIR]},
                "enforce_guard": {"type": "boolean"},
                "path": {"enum": ["auto", "direct", "lowrank", "pointwise"]},
            },
        },
        "data": {
            "type": "object", "additionalProperties": False, "required": ["kind"],
            "properties": {
                "kind": {"enum": ["packets", "random-phase"]},
                "eps": {"type": "number", "exclusiveMinimum": 0},
                "packets": {"type": "array", "minItems": 1, "items": {
                    "type": "object", "additionalProperties": False,
                    "required": ["amplitude", "center", "width", "carrier"],
                    "properties": {"amplitude": _NUM, "center": _NUM,
                                   "width": {"type": "number", "exclusiveMinimum": 0},
                                   "carrier": _NUM}}},
                "bins": {"type": "array", "items": {"type": "integer"}, "minItems": 2,
                         "maxItems": 2},
                "width": {"type": "number", "exclusiveMinimum": 0},
                "members": {"type": "integer", "minimum": 1},
            },
        },
        "diagnostics": {
            "type": "object", "additionalProperties": False,
            "properties": {
                "k_max": {"type": "integer", "minimum": 1},
                "flux_bins": {"type": "array", "items": {"type": "integer"}},
                "flux_xi0": {"type": "array", "items": _NUM},
                "flux_radius": {"type": "number", "exclusiveMinimum": 0},
                "flux_dt": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "flux_time": {"type": "number", "minimum": 0},
                "morawetz_pairs": {"type": "array", "items": {
                    "type": "array", "items": {"type": "integer"}, "minItems": 2, "maxItems": 2}},
                "morawetz_xi0": _NUM,
                "morawetz_stencil": {"type": "integer", "minimum": 1},
                "x0_list": {"type": "array", "items": _NUM},
                "eps_ladder": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                               "minItems": 3},
            },
        },
    },
}


class ConfigError(ValueError):
    """Schema or semantic error; ``messages`` carry line and field diagnostics."""

    def __init__(self, messages: list[str]):
        super().__init__("\n".join(messages))
        self.messages = messages


def _node_at(node, path):
    for key in path:
        if isinstance(node, yaml.MappingNode):
            match = [v for k, v in node.value if k.value == key]
            if not match:
                return node
            node = match[0]
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            return node
    return node


@dataclass
class ExperimentConfig:
    raw: dict
    source: Path | None = None
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_text(cls, text: str, source: Path | None = None) -> "ExperimentConfig":
        try:
            root = yaml.compose(text)
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError([f"yaml: {exc}"]) from exc
        if not isinstance(data, dict):
            raise ConfigError(["config root must be a mapping"])
        validator = jsonschema.Draft7Validator(SCHEMA)
        errors = sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path)))
        if errors:
            msgs = []
            for err in errors:
                node = _node_at(root, list(err.absolute_path))
                where = "/".join(map(str, err.absolute_path)) or "<root>"
                msgs.append(f"line {node.start_mark.line + 1}: {where}: {err.message}")
            raise ConfigError(msgs)
        base = source.parent if source is not None else Path.cwd()
        cfg = cls(data, source, base)
        cfg._check_semantics(root)
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError([f"config file {path} does not exist"])
        return cls.from_text(path.read_text(), path)

    def _check_semantics(self, root):
        msgs = []
        sym = self.raw["symbol"]
        if isinstance(sym, dict) and not (self.base_dir / sym["table"]).exists():
            line = _node_at(root, ["symbol", "table"]).start_mark.line + 1
            msgs.append(f"line {line}: symbol/table: file {sym['table']} does not exist")
        data = self.raw["data"]
        if data["kind"] == "packets" and "packets" not in data:
            line = _node_at(root, ["data"]).start_mark.line + 1
            msgs.append(f"line {line}: data: kind 'packets' needs a 'packets' list")
        if data["kind"] == "random-phase" and "bins" not in data:
            line = _node_at(root, ["data"]).start_mark.line + 1
            msgs.append(f"line {line}: data: kind 'random-phase' needs 'bins'")
        try:
            self.grid()
        except ValueError as exc:
            line = _node_at(root, ["grid"]).start_mark.line + 1
            msgs.append(f"line {line}: grid: {exc}")
        if msgs:
            raise ConfigError(msgs)

    # accessors ----------------------------------------------------------------------
    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    @property
    def diagnostics(self) -> dict:
        return self.raw.get("diagnostics", {})

    def config_hash(self) -> str:
        canonical = json.dumps(self.raw, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()[:16]

    def with_seed(self, seed: int | None) -> "ExperimentConfig":
        if seed is None:
            return self
        return ExperimentConfig({**self.raw, "seed": int(seed)}, self.source, self.base_dir)

    def symbol(self) -> TrilinearSymbol:
        sym = self.raw["symbol"]
        if isinstance(sym, dict):
            return read_symbol_file(self.base_dir / sym["table"])
        return parse_symbol(sym)

    def grid(self) -> GridSpec:
        g = self.raw["grid"]
        return GridSpec(num_points=int(g["num_points"]), circumference=float(g["circumference"]))

    def solver(self) -> SolverConfig:
        s = dict(self.raw.get("solver", {}))
        if "band" in s:
            s["band"] = tuple(s["band"])
        if isinstance(s.get("dense"), list):
            s["dense"] = tuple(s["dense"])
        return SolverConfig(**s)

    def initial_data(self, member: int = 0, eps: float | None = None) -> Field:
        """Initial field of ensemble member ``member``, rescaled to norm eps when given."""
        grid = self.grid()
        data = self.raw["data"]
        if data["kind"] == "packets":
            u = packet_field(grid, data["packets"])
        else:
            rng = np.random.default_rng([self.seed, member])
            lo, hi = data["bins"]
            u = random_phase_field(grid, range(lo, hi + 1), data.get("width", 8.0), rng)
        eps = data.get("eps") if eps is None else eps
        if eps is not None:
            u = u * (eps / u.norm())
        return u

    @property
    def members(self) -> int:
        return int(self.raw["data"].get("members", 1))


def packet_field(grid: GridSpec, packets) -> Field:
    """Sum of Gaussian packets A exp(-(x - x0)^2 / (2 w^2) + i k x)."""
    x = grid.x
    s = np.zeros(grid.num_points, dtype=complex)
    for p in packets:
        s += p["amplitude"] * np.exp(-(x - p["center"]) ** 2 / (2 * p["width"] ** 2)
                                     + 1j * p["carrier"] * x)
    return Field(grid, s)


def random_phase_field(grid: GridSpec, bins, width: float, rng: np.random.Generator) -> Field:
    """Equal-mass Gaussian packets, one per bin, with random phases and positions."""
    x = grid.x
    L = grid.circumference
    s = np.zeros(grid.num_points, dtype=complex)
    for k in bins:
        phase = rng.uniform(0, 2 * np.pi)
        centre = rng.uniform(-L / 8, L / 8)
        s += np.exp(-(x - centre) ** 2 / (2 * width ** 2) + 1j * (k * x + phase))
    return Field(grid, s)


__all__ = ["SCHEMA", "ConfigError", "ExperimentConfig", "packet_field", "random_phase_field"]
