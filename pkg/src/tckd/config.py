"""Run configuration: JSON file + TCKD_* environment overrides + embedded defaults.

Every command writes its fully-resolved config beside its outputs, so any run
can be audited and reproduced from the artifacts alone.
"""

from __future__ import annotations

import copy
import json
import os

import numpy as np


class ConfigError(ValueError):
    """Bad or missing configuration."""


ENV_PREFIX = "TCKD_"

DEFAULT_CONFIG: dict = {
    "seed": None,  # mandatory
    "out": "runs/out",
    "mode": "temp_char",
    "dataset": {
        "path": None,
        "format": "precomputed",
        "test_ratio": 0.2,
        "max_subwords": 512,
        "flight_mode": "release_to_press",
    },
    "synth": {
        "num_users": 8,
        "samples_per_user": 30,
        "phrase_pool": [],
        "hold_range": [60.0, 200.0],
        "flight_range": [20.0, 180.0],
        "jitter_range": [5.0, 25.0],
    },
    "model": {
        "num_layers": 2,
        "num_heads": 4,
        "hidden_size": 64,
        "gru_hidden": 64,
        "embed_size": 32,
        "max_seq_len": 128,
        "dropout_rate": 0.1,
        "temporal_mode": "separate",
    },
    "train": {
        "epochs": 5,
        "batch_size": 8,
        "learning_rate": 5e-5,
        "beta1": 0.9,
        "beta2": 0.999,
        "epsilon": 1e-8,
    },
    "fed": {
        "num_clients": 100,
        "sample_ratio": 0.1,
        "rounds": 5,
        "local_epochs": 1,
        "partition": "by_user",
    },
    "eval": {
        "tasks": ["identification", "authentication"],
    },
    "compare": {
        "rows": ["temp_char", "char_only", "manhattan", "lstm_raw",
                 "lstm_charbert_embed", "lstm_tempchar_embed"],
        "lstm_hidden": 64,
    },
    "checkpoint": None,
}

_SECTIONS = ("dataset", "synth", "model", "train", "fed", "eval", "compare")


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}.{key}" if path else key
        if key not in out:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(out[key], dict) and isinstance(value, dict):
            out[key] = _merge(out[key], value, where)
        else:
            out[key] = value
    return out


def _env_overrides(environ) -> dict:
    """TCKD_SEED=7 -> {"seed": 7}; TCKD_TRAIN_EPOCHS=3 -> {"train": {"epochs": 3}}."""
    out: dict = {}
    for name, raw in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        key = name[len(ENV_PREFIX):].lower()
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        section = key.split("_", 1)[0]
        if section in _SECTIONS and "_" in key:
            out.setdefault(section, {})[key.split("_", 1)[1]] = value
        else:
            out[key] = value
    return out


def load_config(path=None, overrides: dict | None = None, environ=None) -> dict:
    """Defaults <- config file <- environment <- CLI flag overrides."""
    cfg = copy.deepcopy(DEFAULT_CONFIG)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        if not isinstance(file_cfg, dict):
            raise ConfigError(f"config file {path} must hold a JSON object")
        cfg = _merge(cfg, file_cfg)
    cfg = _merge(cfg, _env_overrides(os.environ if environ is None else environ))
    if overrides:
        cfg = _merge(cfg, overrides)
    return cfg


def require(cfg: dict, key: str):
    """Fetch a dotted key, raising ConfigError naming the field when unset."""
    node = cfg
    for part in key.split("."):
        node = node.get(part) if isinstance(node, dict) else None
        if node is None:
            raise ConfigError(f"missing required config field: {key}")
    return node


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays so json can serialize reports."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    return obj


def dump_json(obj, path) -> None:
    """Canonical JSON: sorted keys, two-space indent, trailing newline.
    Byte-identical for equal inputs."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_jsonable(obj), fh, sort_keys=True, indent=2)
        fh.write("\n")
