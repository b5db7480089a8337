"""
Experiment configuration: schema, defaults and loading.

Configs are JSON or YAML mappings validated against :data:`SCHEMA`. Defaults
are filled in by :func:`normalize`, which also performs the checks a JSON
schema cannot express (unique model identifiers, calibration lengths).
"""

from __future__ import annotations

import copy
import json
from pathlib import Path
from typing import Any

import jsonschema
import yaml

__all__ = ["ConfigError", "DataError", "FAMILIES", "SCHEMA", "load_config", "normalize"]

FAMILIES = ("fq_ab", "fq_al", "edf", "ccc_garch", "dcc_garch")
SYNTHETIC_KINDS = ("factor_gaussian", "factor_t", "egarch_panel", "regime_switch")
TRANSFORMS = ("log_returns", "simple_returns", "first_difference", "none")


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class DataError(RuntimeError):
    """Unusable input data (CLI exit code 3)."""


_number_or_map = {
    "oneOf": [
        {"type": "number"},
        {"type": "object", "additionalProperties": {"type": "number"}},
    ]
}

SCHEMA: dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["data", "models"],
    "properties": {
        "seed": {"type": "integer", "minimum": 0},
        "output": {"type": "string"},
        "data": {
            "type": "object",
            "oneOf": [{"required": ["synthetic"]}, {"required": ["csv"]}],
            "additionalProperties": False,
            "properties": {
                "synthetic": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": list(SYNTHETIC_KINDS)},
                        "n": {"type": "integer", "minimum": 1},
                        "T": {"type": "integer", "minimum": 2},
                        "factors": {"type": "integer", "minimum": 1},
                        "loadings": {"type": "array", "items": {"type": "number"}},
                        "idio_sd": {"type": "number", "exclusiveMinimum": 0},
                        "regime_scale": {"type": "number", "exclusiveMinimum": 0},
                        "seed": {"type": "integer", "minimum": 0},
                        "start": {"type": "string"},
                    },
                },
                "csv": {"type": "string"},
                "date_column": {"type": "string"},
                "date_format": {"type": "string"},
                "columns": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "transform": {
                    "oneOf": [
                        {"enum": list(TRANSFORMS)},
                        {"type": "object", "additionalProperties": {"enum": list(TRANSFORMS[:3])}},
                    ]
                },
                "multiplier": _number_or_map,
            },
        },
        "models": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["id", "family", "calibration"],
                "properties": {
                    "id": {"type": "string", "pattern": "^[A-Za-z0-9_.()+-]+$"},
                    "family": {"enum": list(FAMILIES)},
                    "calibration": {"type": "integer", "minimum": 10},
                    "m": {"type": "integer", "minimum": 1},
                    "variance_threshold": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                    "N": {"type": "integer", "minimum": 1},
                    "B": {"type": "integer", "minimum": 1},
                    "omega_scale": {"type": "number", "minimum": 0},
                    "omega_per_T": {"type": "boolean"},
                    "interpolation": {"enum": ["pchip", "pchip_quantile", "step", "epanechnikov_kernel"]},
                    "warm_start": {"type": "boolean"},
                    "guard_multiple": {"type": "number", "exclusiveMinimum": 0},
                    "starts": {"type": "integer", "minimum": 1},
                },
            },
        },
        "taus": {
            "oneOf": [
                {"const": "Q9"},
                {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}, "minItems": 2},
            ]
        },
        "copula": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"family": {"const": "gaussian"}},
        },
        "samples": {"type": "integer", "minimum": 2},
        "rules": {"type": "array", "items": {"type": "string", "pattern": "^(es|vs_[0-9.]+|wcrps_[a-z_]+)$"}, "minItems": 1},
        "mcs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "alphas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}, "minItems": 1},
                "reps": {"type": "integer", "minimum": 100},
                "block_length": {"oneOf": [{"const": "auto"}, {"type": "integer", "minimum": 1}]},
            },
        },
        "subperiods": {"type": "array", "items": {"type": "string"}},
        "evaluate_last": {"type": "integer", "minimum": 1},
        "inject_failures": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["model", "date"],
                "properties": {"model": {"type": "string"}, "date": {"type": "string"}},
            },
        },
        "poison_future": {"type": "boolean"},
        "checkpoint": {"type": "boolean"},
    },
}

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "output": "fqcast-out",
    "taus": "Q9",
    "copula": {"family": "gaussian"},
    "samples": 10000,
    "rules": [
        "wcrps_uniform",
        "wcrps_centre",
        "wcrps_left_tail",
        "wcrps_right_tail",
        "wcrps_both_tails",
        "es",
        "vs_0.5",
        "vs_1",
        "vs_2",
    ],
    "mcs": {"alphas": [0.1, 0.25], "reps": 1000, "block_length": "auto"},
    "subperiods": [],
    "evaluate_last": None,
    "inject_failures": [],
    "poison_future": False,
    "checkpoint": True,
}

MODEL_DEFAULTS: dict[str, dict[str, Any]] = {
    "fq_ab": {"variance_threshold": 0.9, "N": 40, "B": 250, "omega_scale": 1.0, "omega_per_T": False},
    "fq_al": {"variance_threshold": 0.9, "interpolation": "pchip"},
    "edf": {},
    "ccc_garch": {"warm_start": True, "guard_multiple": 10.0},
    "dcc_garch": {"warm_start": True, "guard_multiple": 10.0},
}

SYNTHETIC_DEFAULTS = {"n": 8, "T": 2500, "factors": 1, "idio_sd": 0.3, "regime_scale": 1.0, "seed": 0, "start": "2000-01-03"}


def normalize(raw: dict[str, Any]) -> dict[str, Any]:
    """
    Validate ``raw`` and return a deep copy with every default filled in.

    Idempotent: a normalised config normalises to itself.
    """
    raw = {k: v for k, v in raw.items() if v is not None}
    try:
        jsonschema.validate(raw, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config invalid at {where}: {exc.message}") from None
    cfg = copy.deepcopy(DEFAULTS)
    for key, value in copy.deepcopy(raw).items():
        if key == "mcs":
            cfg["mcs"].update(value)
        else:
            cfg[key] = value
    if "synthetic" in cfg["data"]:
        cfg["data"]["synthetic"] = {**SYNTHETIC_DEFAULTS, **cfg["data"]["synthetic"]}
    ids = [m["id"] for m in cfg["models"]]
    dupes = sorted({i for i in ids if ids.count(i) > 1})
    if dupes:
        raise ConfigError(f"duplicate model identifiers: {dupes}")
    cfg["models"] = [{**MODEL_DEFAULTS[m["family"]], **m} for m in cfg["models"]]
    for m in cfg["models"]:
        if m["family"] in ("ccc_garch", "dcc_garch") and m["calibration"] < 500:
            raise ConfigError(f"model {m['id']}: GARCH benchmarks need calibration >= 500")
    for f in cfg["inject_failures"]:
        if f["model"] not in ids:
            raise ConfigError(f"inject_failures names unknown model {f['model']!r}")
    if isinstance(cfg["taus"], list):
        t = cfg["taus"]
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ConfigError("taus must be strictly increasing")
    if cfg["subperiods"] != sorted(cfg["subperiods"]):
        raise ConfigError("subperiod boundaries must be sorted")
    return cfg


def load_config(path: str | Path) -> dict[str, Any]:
    """
    Read a JSON or YAML config file and normalise it.

    A relative ``data.csv`` path is resolved against the config file's folder.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            raw = yaml.safe_load(text)
        else:
            raw = json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"config {path} must be a mapping")
    cfg = normalize(raw)
    csv_path = cfg["data"].get("csv")
    if csv_path is not None and not Path(csv_path).is_absolute():
        cfg["data"]["csv"] = str(path.parent / csv_path)
    return cfg
