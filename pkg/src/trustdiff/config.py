"""Experiment manifests: JSON documents validated against a schema.

All violations are collected and reported together in one
:class:`ConfigError`.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any, Mapping

import jsonschema

from .game import PayoffMatrix, Sensitivity, TrustProfile
from .dynamics import MODELS, STRATEGIES

GENERATORS = ("random_regular", "configuration", "lognormal")

_number = {"type": "number"}
_payoff = {
    "oneOf": [
        {"type": "object", "properties": {k: _number for k in "abcd"},
         "required": list("abcd"), "additionalProperties": False},
        {"type": "array", "items": _number, "minItems": 4, "maxItems": 4},
    ]
}
_trust = {
    "oneOf": [
        {"type": "number", "exclusiveMinimum": 0},
        {"type": "object", "patternProperties": {"^[0-9]+$": {"type": "number", "exclusiveMinimum": 0}},
         "additionalProperties": False, "minProperties": 1},
    ]
}
_counts = {
    "oneOf": [
        {"type": "object", "patternProperties": {"^[0-9]+$": {"type": "integer", "minimum": 0}},
         "additionalProperties": False, "minProperties": 1},
        {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
    ]
}
_graph = {
    "type": "object",
    "properties": {
        "edge_list": {"type": "string"},
        "generator": {"enum": list(GENERATORS)},
        "n": {"type": "integer", "minimum": 1},
        "k": {"type": "integer", "minimum": 0},
        "degree_counts": _counts,
        "mean_degree": {"type": "number", "minimum": 1},
        "sigma": {"type": "number", "exclusiveMinimum": 0},
        "max_degree": {"type": "integer", "minimum": 1},
        "per_trial": {"type": "boolean"},
    },
    "additionalProperties": False,
}

EXPERIMENT_SCHEMA = {
    "type": "object",
    "properties": {
        "graph": _graph,
        "model": {"enum": list(MODELS)},
        "payoff": _payoff,
        "delta_prime": _trust,
        "beta": {"type": "number", "minimum": 0},
        "beta_sw": {"type": "number", "minimum": 0},
        "horizon": {"type": "integer", "minimum": 0},
        "stop_on_consensus": {"type": "boolean"},
        "metric_stride": {"type": ["integer", "null"], "minimum": 1},
        "seed_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "allocation": {"enum": list(STRATEGIES)},
        "trials": {"type": "integer", "minimum": 1},
        "master_seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "out": {"type": "string"},
    },
    "required": ["graph", "payoff", "delta_prime"],
    "additionalProperties": False,
}

CHAIN_SCHEMA = {
    "type": "object",
    "properties": {
        "degree_counts": _counts,
        "payoff": _payoff,
        "delta_prime": _trust,
        "beta": {"type": "number", "minimum": 0},
        "beta_sw": {"type": "number", "minimum": 0},
        "model": {"enum": ["NE", "LTE"]},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "max_states": {"type": "integer", "minimum": 1},
        "master_seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
    },
    "required": ["degree_counts", "payoff", "delta_prime"],
    "additionalProperties": False,
}

THRESHOLD_SCHEMA = {
    "type": "object",
    "properties": {
        "payoff": _payoff,
        "delta_primes": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}, "minItems": 1},
        "master_seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
    },
    "required": ["payoff", "delta_primes"],
    "additionalProperties": False,
}


class ConfigError(ValueError):
    """Invalid configuration; ``errors`` lists every violation found."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  - " + "\n  - ".join(self.errors))


def load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"]) from None
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: malformed JSON ({exc})"]) from None
    if not isinstance(data, dict):
        raise ConfigError([f"{path}: top level must be a JSON object"])
    return data


def _schema_errors(data: Mapping, schema: Mapping) -> tuple[list[str], set]:
    """Messages for every schema violation plus the top-level keys involved."""
    v = jsonschema.Draft202012Validator(schema)
    out, bad = [], set()
    for err in sorted(v.iter_errors(data), key=lambda e: list(map(str, e.absolute_path))):
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        out.append(f"{where}: {err.message}")
        if err.absolute_path:
            bad.add(err.absolute_path[0])
    missing = {k for k in schema.get("required", ()) if k not in data}
    return out, bad | missing


def _payoff_from(raw, errors: list[str]) -> PayoffMatrix | None:
    vals = [raw[k] for k in "abcd"] if isinstance(raw, Mapping) else list(raw)
    p = PayoffMatrix.unchecked(*vals)
    bad = p.violations()
    if bad:
        errors.extend(f"payoff: {msg}" for msg in bad)
        return None
    return PayoffMatrix(*vals)


def parse_counts(raw) -> dict[int, int]:
    if isinstance(raw, Mapping):
        return {int(k): int(v) for k, v in raw.items()}
    return {k: int(c) for k, c in enumerate(raw, start=1) if c}


@dataclass(frozen=True)
class GraphSource:
    edge_list: str | None = None
    generator: str | None = None
    n: int | None = None
    k: int | None = None
    degree_counts: Mapping[int, int] | None = None
    mean_degree: float | None = None
    sigma: float = 1.0
    max_degree: int | None = None
    per_trial: bool = False

    def to_json(self) -> dict:
        out: dict[str, Any] = {}
        for name in ("edge_list", "generator", "n", "k", "mean_degree", "max_degree"):
            v = getattr(self, name)
            if v is not None:
                out[name] = v
        if self.degree_counts is not None:
            out["degree_counts"] = {str(k): v for k, v in sorted(self.degree_counts.items())}
        if self.generator == "lognormal":
            out["sigma"] = self.sigma
        out["per_trial"] = self.per_trial
        return out


def _graph_from(raw: Mapping, errors: list[str]) -> GraphSource | None:
    has_file, gen = "edge_list" in raw, raw.get("generator")
    if has_file == (gen is not None):
        errors.append("graph: give exactly one of edge_list or generator")
        return None
    if has_file:
        path = raw["edge_list"]
        if not os.path.isfile(path):
            errors.append(f"graph/edge_list: file not found: {path}")
        if raw.get("per_trial"):
            errors.append("graph/per_trial: only valid for generators")
        return GraphSource(edge_list=path)
    needs = {"random_regular": ("n", "k"), "configuration": ("degree_counts",),
             "lognormal": ("n", "mean_degree")}[gen]
    missing = [f for f in needs if f not in raw]
    errors.extend(f"graph: generator {gen} needs field {f}" for f in missing)
    if missing:
        return None
    counts = parse_counts(raw["degree_counts"]) if "degree_counts" in raw else None
    return GraphSource(
        generator=gen, n=raw.get("n"), k=raw.get("k"), degree_counts=counts,
        mean_degree=raw.get("mean_degree"), sigma=raw.get("sigma", 1.0),
        max_degree=raw.get("max_degree"), per_trial=bool(raw.get("per_trial", False)),
    )


def _trust_from(raw) -> TrustProfile:
    return TrustProfile.parse(raw) if isinstance(raw, Mapping) else TrustProfile(float(raw))


@dataclass(frozen=True)
class ExperimentConfig:
    graph: GraphSource
    payoff: PayoffMatrix
    trust: TrustProfile
    model: str = "LTE"
    sens: Sensitivity = field(default_factory=Sensitivity)
    horizon: int = 10_000
    stop_on_consensus: bool = True
    metric_stride: int | None = None
    seed_fraction: float = 0.1
    allocation: str = "proportional"
    trials: int = 1
    master_seed: int = 0
    out: str | None = None

    @classmethod
    def from_dict(cls, data: Mapping) -> "ExperimentConfig":
        errors, bad = _schema_errors(data, EXPERIMENT_SCHEMA)
        # semantic checks still run on fields whose shape is valid
        graph = _graph_from(data["graph"], errors) if "graph" not in bad else None
        payoff = _payoff_from(data["payoff"], errors) if "payoff" not in bad else None
        if graph is not None and "delta_prime" not in bad and isinstance(data["delta_prime"], Mapping):
            given = {int(k) for k in data["delta_prime"]}
            needed = set()
            if graph.generator == "random_regular" and graph.k:
                needed = {graph.k}
            elif graph.generator == "configuration":
                needed = {k for k, c in graph.degree_counts.items() if c and k > 0}
            errors.extend(f"delta_prime: no value for degree {k}" for k in sorted(needed - given))
        if errors:
            raise ConfigError(errors)
        return cls(
            graph=graph, payoff=payoff, trust=_trust_from(data["delta_prime"]),
            model=data.get("model", "LTE"),
            sens=Sensitivity(data.get("beta", 1.0), data.get("beta_sw", 1.0)),
            horizon=data.get("horizon", 10_000),
            stop_on_consensus=data.get("stop_on_consensus", True),
            metric_stride=data.get("metric_stride"),
            seed_fraction=data.get("seed_fraction", 0.1),
            allocation=data.get("allocation", "proportional"),
            trials=data.get("trials", 1),
            master_seed=data.get("master_seed", 0),
            out=data.get("out"),
        )

    def to_json(self) -> dict:
        return {
            "graph": self.graph.to_json(),
            "model": self.model,
            "payoff": self.payoff.to_dict(),
            "delta_prime": self.trust.to_json(),
            "beta": self.sens.beta,
            "beta_sw": self.sens.beta_sw,
            "horizon": self.horizon,
            "stop_on_consensus": self.stop_on_consensus,
            "metric_stride": self.metric_stride,
            "seed_fraction": self.seed_fraction,
            "allocation": self.allocation,
            "trials": self.trials,
            "master_seed": self.master_seed,
        }


@dataclass(frozen=True)
class ChainConfig:
    degree_counts: Mapping[int, int]
    payoff: PayoffMatrix
    trust: TrustProfile
    sens: Sensitivity
    model: str = "LTE"
    alpha: float | None = None
    max_states: int = 5_000_000
    out: str | None = None

    @classmethod
    def from_dict(cls, data: Mapping) -> "ChainConfig":
        errors, bad = _schema_errors(data, CHAIN_SCHEMA)
        payoff = _payoff_from(data["payoff"], errors) if "payoff" not in bad else None
        counts = parse_counts(data["degree_counts"]) if "degree_counts" not in bad else None
        if counts is not None:
            if any(k < 1 for k in counts):
                errors.append("degree_counts: degrees must be >= 1")
            if sum(counts.values()) < 2:
                errors.append("degree_counts: need at least 2 players")
        if counts is not None and "delta_prime" not in bad and isinstance(data["delta_prime"], Mapping):
            given = {int(k) for k in data["delta_prime"]}
            missing = sorted(k for k, c in counts.items() if c and k not in given)
            errors.extend(f"delta_prime: no value for degree {k}" for k in missing)
        if errors:
            raise ConfigError(errors)
        return cls(counts, payoff, _trust_from(data["delta_prime"]), Sensitivity(data.get("beta", 1.0), data.get("beta_sw", 1.0)),
                   data.get("model", "LTE"), data.get("alpha"), data.get("max_states", 5_000_000),
                   data.get("out"))


@dataclass(frozen=True)
class ThresholdConfig:
    payoff: PayoffMatrix
    delta_primes: tuple[float, ...]
    out: str | None = None

    @classmethod
    def from_dict(cls, data: Mapping) -> "ThresholdConfig":
        errors, bad = _schema_errors(data, THRESHOLD_SCHEMA)
        if "payoff" not in bad:
            payoff = _payoff_from(data["payoff"], errors)
        if errors:
            raise ConfigError(errors)
        return cls(payoff, tuple(float(v) for v in data["delta_primes"]), data.get("out"))
