"""Pipeline configuration: named defaults, strict validation, flag merging."""

from __future__ import annotations

import copy
import json
from typing import Any, Dict

from mtforge.errors import ConfigError

# Every pipeline constant lives here under its stage section. CLI flags
# override config values; unknown sections or keys are rejected.
DEFAULT_CONFIG: Dict[str, Dict[str, Any]] = {
    "filter": {
        "max_len": 250,
        "max_ratio": 3.0,
        "lid_alpha": 0.1,
    },
    "lm": {
        "order": 5,
        "discount": 0.75,
    },
    "select": {
        "threshold": 0.01,
        "literal_paper_inequality": False,
    },
    "subword": {
        "temperature": 5.0,
        "vocab_size": None,  # required per run; no asserted default
        "marker": "@@",
    },
    "mine": {
        "k": 4,
        "threshold": 1.06,
    },
    "shard": {
        "base": None,  # required per run
    },
    "moe": {
        "num_experts": None,  # required per run
        "top_k": 2,
        "capacity_factor": 2.0,
        "gate_loss_weight": 0.01,
        "alternate_layers": True,  # placement schema field; recorded, not executed
    },
    "ckpt": {
        "avg_last": 5,
    },
    "rerank": {
        "tune_trials": 1000,
        "tune_bounds": [0.0, 2.0],
    },
    "bleu": {
        "tokenize": "intl",
    },
    "postprocess": {
        "lang": None,  # required per run
    },
}

_TYPES = {
    ("filter", "max_len"): int,
    ("filter", "max_ratio"): (int, float),
    ("filter", "lid_alpha"): (int, float),
    ("lm", "order"): int,
    ("lm", "discount"): (int, float),
    ("select", "threshold"): (int, float),
    ("select", "literal_paper_inequality"): bool,
    ("subword", "temperature"): (int, float),
    ("subword", "vocab_size"): int,
    ("subword", "marker"): str,
    ("mine", "k"): int,
    ("mine", "threshold"): (int, float),
    ("shard", "base"): str,
    ("moe", "num_experts"): int,
    ("moe", "top_k"): int,
    ("moe", "capacity_factor"): (int, float),
    ("moe", "gate_loss_weight"): (int, float),
    ("moe", "alternate_layers"): bool,
    ("ckpt", "avg_last"): int,
    ("rerank", "tune_trials"): int,
    ("rerank", "tune_bounds"): list,
    ("bleu", "tokenize"): str,
    ("postprocess", "lang"): str,
}


def default_config() -> Dict[str, Dict[str, Any]]:
    return copy.deepcopy(DEFAULT_CONFIG)


def validate_config(doc: Any) -> Dict[str, Dict[str, Any]]:
    """Strict-schema merge of `doc` over the defaults."""
    if not isinstance(doc, dict):
        raise ConfigError("bad_config", "config must be a JSON object")
    merged = default_config()
    for section, values in doc.items():
        if section not in merged:
            raise ConfigError("unknown_config_section", f"unknown section {section!r}")
        if not isinstance(values, dict):
            raise ConfigError("bad_config_section", f"section {section!r} must be an object")
        for key, value in values.items():
            if key not in merged[section]:
                raise ConfigError("unknown_config_key", f"unknown key {section}.{key}")
            expected = _TYPES[(section, key)]
            if value is not None and not isinstance(value, expected):
                # bool is an int subclass; reject it for numeric keys
                if isinstance(value, bool) and expected is not bool:
                    raise ConfigError("bad_config_value", f"{section}.{key}: wrong type")
                raise ConfigError("bad_config_value", f"{section}.{key}: wrong type")
            if isinstance(value, bool) and expected is not bool:
                raise ConfigError("bad_config_value", f"{section}.{key}: wrong type")
            merged[section][key] = value
    bounds = merged["rerank"]["tune_bounds"]
    if not (isinstance(bounds, list) and len(bounds) == 2 and all(isinstance(b, (int, float)) for b in bounds)):
        raise ConfigError("bad_config_value", "rerank.tune_bounds must be [lo, hi]")
    return merged


def load_config(path: str) -> Dict[str, Dict[str, Any]]:
    with open(path, encoding="utf-8") as fp:
        try:
            doc = json.load(fp)
        except json.JSONDecodeError as exc:
            raise ConfigError("bad_config_json", f"{path}: {exc}")
    return validate_config(doc)


def dump_config(cfg: Dict[str, Dict[str, Any]]) -> str:
    return json.dumps(cfg, indent=2, sort_keys=True) + "\n"
