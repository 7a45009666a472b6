"""Experiment configuration: schema validation, defaults and fingerprints."""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Optional

import jsonschema

from .errors import ConfigError

RUNTIMES = ("central", "distributed", "async-discrete", "async-continuous", "certify")


@lru_cache(maxsize=None)
def load_schema(name: str) -> dict:
    text = resources.files("fplab").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)


def _error_path(err: jsonschema.ValidationError) -> str:
    path = [str(p) for p in err.absolute_path]
    if err.validator == "additionalProperties":
        extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
        path += extra[:1]
    elif err.validator == "required":
        missing = [k for k in err.schema.get("required", []) if k not in err.instance]
        path += missing[:1]
    return ".".join(path) or "<root>"


def validate_document(doc, schema_name: str) -> None:
    """Raise :class:`ConfigError` naming the offending field path."""
    validator = jsonschema.Draft202012Validator(load_schema(schema_name))
    errors = sorted(validator.iter_errors(doc), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = errors[0]
        where = _error_path(err)
        raise ConfigError(err.message, field=where)


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully-defaulted experiment description.

    ``initial_actions`` uses 1-based action indices, like the trace CSVs.
    Blocks that a runtime does not use are kept but ignored.
    """

    game: object
    name: str = "experiment"
    description: str = ""
    runtime: str = "central"
    algorithm: str = "fp"
    horizon: int = 1000
    epsilon: dict = field(default_factory=lambda: {"kind": "zero"})
    gamma: dict = field(default_factory=lambda: {"kind": "harmonic"})
    selector: str = "sticky"
    seed: int = 0
    metrics: tuple = ("nash_gap",)
    stride: int = 10
    initial_actions: Optional[tuple] = None
    graph: dict = field(default_factory=dict)
    protocol: str = "running_consensus"
    init: str = "uniform"
    timing: dict = field(default_factory=dict)
    certify: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        validate_document(doc, "config")
        doc = copy.deepcopy(doc)
        if "metrics" in doc:
            doc["metrics"] = tuple(doc["metrics"])
        if "initial_actions" in doc:
            doc["initial_actions"] = tuple(doc["initial_actions"])
        cfg = cls(**doc)
        cfg.check()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            doc = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file {path} not found", field="config") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}", field="config") from None
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object", field="<root>")
        return cls.from_dict(doc)

    def check(self) -> None:
        if self.runtime == "async-discrete" and self.timing.get("mode", "discrete") != "discrete":
            raise ConfigError("async-discrete runtime needs timing.mode 'discrete'", field="timing.mode")
        if self.runtime == "async-continuous" and self.timing.get("mode") != "continuous":
            raise ConfigError("async-continuous runtime needs timing.mode 'continuous'", field="timing.mode")
        if self.runtime in ("async-discrete", "async-continuous") and not self.timing:
            raise ConfigError("asynchronous runtimes need a timing block", field="timing")

    def with_seed(self, seed: int) -> "ExperimentConfig":
        if seed < 0:
            raise ConfigError("seed must be nonnegative", field="seed")
        return ExperimentConfig(**{**asdict(self), "seed": int(seed)})

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["metrics"] = list(self.metrics)
        doc["initial_actions"] = None if self.initial_actions is None else list(self.initial_actions)
        return doc

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.to_dict())

    def game_label(self) -> str:
        if isinstance(self.game, str):
            return self.game
        return self.game.get("name", "custom")

    def zero_based_initial(self) -> Optional[tuple]:
        if self.initial_actions is None:
            return None
        return tuple(a - 1 for a in self.initial_actions)


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def fingerprint(doc) -> str:
    """SHA-256 of the canonical JSON text; insensitive to key order."""
    return hashlib.sha256(canonical_json(doc).encode()).hexdigest()
