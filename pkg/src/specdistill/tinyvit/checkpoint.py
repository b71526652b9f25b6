"""Checkpoints: one NPY file per parameter tensor plus a JSON manifest."""

import json
import os

from ..exceptions import ConfigError, ShapeMismatch
from ..tensor import read_array, save_npy
from .model import ModelConfig, param_shapes

MANIFEST = "manifest.json"


def save_checkpoint(directory, params, cfg, extra=None):
    os.makedirs(directory, exist_ok=True)
    tensors = {}
    for name, value in params.items():
        fname = name + ".npy"
        save_npy(value, os.path.join(directory, fname))
        tensors[name] = {"file": fname, "shape": list(value.shape)}
    manifest = {"config": cfg.to_dict(), "tensors": tensors}
    if extra:
        manifest.update(extra)
    with open(os.path.join(directory, MANIFEST), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_checkpoint(directory):
    """Return ``(params, cfg, manifest)``."""
    path = os.path.join(directory, MANIFEST)
    try:
        with open(path) as fh:
            manifest = json.load(fh)
        cfg = ModelConfig(**manifest["config"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"{path}: unreadable checkpoint manifest: {exc}") from exc
    params = {}
    for name, shape in param_shapes(cfg).items():
        entry = manifest["tensors"].get(name)
        if entry is None:
            raise ShapeMismatch(f"checkpoint {directory} lacks tensor {name}")
        arr = read_array(os.path.join(directory, entry["file"]))
        if arr.shape != shape:
            raise ShapeMismatch(f"{name}: stored shape {arr.shape}, config expects {shape}")
        params[name] = arr.copy()
    return params, cfg, manifest
