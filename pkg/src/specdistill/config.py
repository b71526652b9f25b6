"""Run configuration: schema, shipped defaults and loading."""

import copy
import json
from importlib import resources

import jsonschema

from .exceptions import ConfigError

_INT1 = {"type": "integer", "minimum": 1}
_INT0 = {"type": "integer", "minimum": 0}
_MODEL = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "patch_size": _INT1, "embed_dim": _INT1, "depth": _INT1, "heads": _INT1,
        "mlp_ratio": _INT1, "seed": _INT0,
    },
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"teacher": _MODEL, "student": _MODEL},
        },
        "distill": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "temperature": {"type": "number", "exclusiveMinimum": 0},
                "alpha": {"type": "number", "minimum": 0, "maximum": 1},
                "beta": {"type": "number", "minimum": 0},
                "top_k": _INT1,
            },
        },
        "data": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "seed": _INT0, "count": _INT1, "val_count": _INT1, "probe": _INT1,
                "epochs": _INT0, "batch": _INT1,
                "lr": {"type": "number", "exclusiveMinimum": 0},
                "weight_decay": {"type": "number", "minimum": 0},
            },
        },
        "io": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "output_dir": {"type": "string"},
                "teacher_checkpoint": {"type": ["string", "null"]},
            },
        },
    },
}


def default_config():
    text = resources.files(__package__).joinpath("default_config.json").read_text()
    return json.loads(text)


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def validate(doc):
    errors = sorted(jsonschema.Draft7Validator(SCHEMA).iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {e.message}")


def resolve(doc):
    """Validate a partial config and fill the gaps from the shipped defaults."""
    validate(doc)
    cfg = _merge(default_config(), doc)
    validate(cfg)
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    return resolve(doc)
