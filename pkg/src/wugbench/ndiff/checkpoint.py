"""Model checkpoints as JSON: portable, diffable, bit-exact for float64.

Python's json writes floats with repr (shortest round-trip form), so a
save/load cycle reproduces every parameter bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Mapping

import numpy as np

from .tensor import Tensor


class CheckpointError(ValueError):
    """Checkpoint file is malformed or does not match expectations."""


def save_checkpoint(path, params: Mapping[str, Tensor], meta: dict | None = None) -> None:
    blob = {
        "meta": dict(meta or {}),
        "parameters": {
            name: {
                "shape": list(p.data.shape),
                "data": [float(v) for v in p.data.reshape(-1)],
            }
            for name, p in sorted(params.items())
        },
    }
    Path(path).write_text(json.dumps(blob, sort_keys=True), encoding="utf-8")


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict]:
    """Returns (name -> array, meta)."""
    try:
        blob = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(blob, dict) or "parameters" not in blob:
        raise CheckpointError(f"{path}: missing 'parameters' section")
    arrays: dict[str, np.ndarray] = {}
    for name, entry in blob["parameters"].items():
        try:
            arrays[name] = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        except (KeyError, TypeError, ValueError) as exc:
            raise CheckpointError(f"{path}: bad entry for parameter '{name}'") from exc
    return arrays, blob.get("meta", {})


def restore_into(params: Mapping[str, Tensor], arrays: Mapping[str, np.ndarray]) -> None:
    """Copy loaded arrays into an existing parameter collection.

    Names and shapes must match exactly; anything else means the checkpoint
    belongs to a different model.
    """
    missing = sorted(set(params) - set(arrays))
    extra = sorted(set(arrays) - set(params))
    if missing or extra:
        raise CheckpointError(f"parameter name mismatch: missing={missing} extra={extra}")
    for name, p in params.items():
        arr = arrays[name]
        if arr.shape != p.data.shape:
            raise CheckpointError(
                f"parameter '{name}': checkpoint shape {arr.shape} != model shape {p.data.shape}"
            )
        p.data = arr.astype(np.float64).copy()
