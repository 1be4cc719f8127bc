"""Attack run configuration: JSON schema, validation, and builders."""
from __future__ import annotations

import json
import math
from pathlib import Path

import jsonschema

from .attack import EvolutionaryAttack
from .encoding import ConfigurationError
from .oracle import RemoteOracle, load_builtin
from .scenarios import Constraint

_CONSTRAINT_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["metric", "comparator", "threshold"],
    "properties": {
        "metric": {"enum": ["correct_confidence",
                            "expected_correct_confidence", "norm"]},
        "comparator": {"enum": ["<=", "<"]},
        "threshold": {"type": "number"},
    },
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["scenario", "encoding", "optimizer", "oracle", "io"],
    "properties": {
        "scenario": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["accuracy_vs_amount", "l0_vs_l1", "robust"]},
                "norm_order": {"enum": [0, 1, 2, "inf"]},
                "constraints": {"type": "array", "items": _CONSTRAINT_SCHEMA},
                "correct_labels": {
                    "type": "array", "items": {"type": "string"}, "minItems": 1,
                },
                "angles": {"type": "array", "items": {"type": "number"}},
                "l1_normalized": {"type": "boolean"},
            },
        },
        "encoding": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["direct", "dct"]},
                "block_size": {"type": "integer", "minimum": 1},
                "bounds": {
                    "type": "array", "items": {"type": "number"},
                    "minItems": 2, "maxItems": 2,
                },
                "luma": {"type": "boolean"},
                "n_patterns": {"type": "integer", "minimum": 1},
                "dct_block": {"type": "integer", "minimum": 2},
                "coeff_bound": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "optimizer": {
            "type": "object",
            "additionalProperties": False,
            "required": ["population_size", "generations"],
            "properties": {
                "population_size": {"type": "integer", "minimum": 1},
                "generations": {"type": "integer", "minimum": 0},
                "neighborhood_size": {"type": "integer", "minimum": 2},
                "delta": {"type": "number", "minimum": 0, "maximum": 1},
                "n_r": {"type": "integer", "minimum": 1},
                "cr": {"type": "number", "minimum": 0, "maximum": 1},
                "f": {"type": "number"},
                "p_m": {"type": ["number", "null"], "minimum": 0, "maximum": 1},
                "eta_m": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer"},
                "evaluation_budget": {"type": ["integer", "null"], "minimum": 1},
            },
        },
        "oracle": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["builtin", "remote"]},
                "weights": {"type": "string"},
                "endpoint": {"type": "string"},
                "timeout": {"type": "number", "exclusiveMinimum": 0},
                "retries": {"type": "integer", "minimum": 1},
                "cache": {"type": "boolean"},
            },
        },
        "io": {
            "type": "object",
            "additionalProperties": False,
            "required": ["image", "output_dir"],
            "properties": {
                "image": {"type": "string"},
                "output_dir": {"type": "string"},
                "export_png": {"type": "boolean"},
            },
        },
        "init": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {"kind": {"enum": ["uniform", "stratified"]}},
        },
    },
}


def load_config(path) -> dict:
    """Read and validate an attack config; raises ConfigurationError."""
    path = Path(path)
    try:
        cfg = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigurationError(f"invalid config: {exc.message}") from exc

    oracle = cfg["oracle"]
    if oracle["kind"] == "builtin":
        if "weights" not in oracle:
            raise ConfigurationError("builtin oracle requires a weights path")
        weights = (path.parent / oracle["weights"]).resolve()
        if not weights.is_file():
            raise ConfigurationError(f"weight file not found: {weights}")
        oracle["weights"] = str(weights)
    elif "endpoint" not in oracle:
        raise ConfigurationError("remote oracle requires an endpoint")

    image = (path.parent / cfg["io"]["image"]).resolve()
    if not image.is_file():
        raise ConfigurationError(f"input image not found: {image}")
    cfg["io"]["image"] = str(image)
    cfg["io"]["output_dir"] = str((path.parent / cfg["io"]["output_dir"]).resolve())
    return cfg


def build_oracle(block: dict):
    if block["kind"] == "builtin":
        return load_builtin(block["weights"], cache=block.get("cache", False))
    return RemoteOracle(
        block["endpoint"],
        timeout=block.get("timeout", 10.0),
        retries=block.get("retries", 3),
        cache=block.get("cache", False),
    )


def build_attack(cfg: dict, oracle) -> EvolutionaryAttack:
    sc = cfg["scenario"]
    enc = cfg["encoding"]
    opt = cfg["optimizer"]
    norm_order = sc.get("norm_order", 2)
    if norm_order == "inf":
        norm_order = math.inf
    constraints = None
    if "constraints" in sc:
        constraints = [Constraint(**c) for c in sc["constraints"]]
    kwargs = dict(
        oracle=oracle,
        scenario=sc["kind"],
        norm_order=norm_order,
        correct_labels=sc.get("correct_labels"),
        constraints=constraints,
        angles=sc.get("angles"),
        l1_normalized=sc.get("l1_normalized", True),
        encoding=enc["kind"],
        init=cfg.get("init", {}).get("kind", "uniform"),
        population_size=opt["population_size"],
        generations=opt["generations"],
        neighborhood_size=opt.get("neighborhood_size", 10),
        delta=opt.get("delta", 0.8),
        n_r=opt.get("n_r", 1),
        cr=opt.get("cr", 0.9),
        f=opt.get("f", 0.5),
        p_m=opt.get("p_m"),
        eta_m=opt.get("eta_m", 20.0),
        seed=opt.get("seed", 0),
        evaluation_budget=opt.get("evaluation_budget"),
    )
    if enc["kind"] == "direct":
        kwargs.update(
            block_size=enc.get("block_size", 1),
            bounds=tuple(enc.get("bounds", (-200.0, 200.0))),
            luma=enc.get("luma", False),
        )
    else:
        kwargs.update(
            n_patterns=enc.get("n_patterns", 5),
            dct_block=enc.get("dct_block", 8),
            coeff_bound=enc.get("coeff_bound", 30.0),
        )
    return EvolutionaryAttack(**kwargs)
