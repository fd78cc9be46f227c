"""JSON checkpoint container.

Layout (format version 1)::

    {
      "format": "cellattn-checkpoint",
      "version": 1,
      "config": {...},                 # resolved run configuration
      "meta": {...},                   # free-form (dataset dims, epoch, ...)
      "params":  {"<name>": {"shape": [...], "values": [...]}},
      "buffers": {"<name>": {"shape": [...], "values": [...]}}
    }

Values are flattened in C order and written with ``repr`` precision so a
float64 round trip is exact.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

FORMAT = "cellattn-checkpoint"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _pack(arrays: dict[str, np.ndarray]) -> dict:
    return {k: {"shape": list(v.shape), "values": np.asarray(v, dtype=np.float64).reshape(-1).tolist()}
            for k, v in arrays.items()}


def _unpack(blob: dict) -> dict[str, np.ndarray]:
    out = {}
    for k, v in blob.items():
        arr = np.asarray(v["values"], dtype=np.float64)
        if arr.size != int(np.prod(v["shape"], dtype=np.int64)):
            raise CheckpointError(f"{k}: {arr.size} values do not fill shape {v['shape']}")
        out[k] = arr.reshape(v["shape"])
    return out


def save_checkpoint(path, params: dict[str, np.ndarray], buffers: dict[str, np.ndarray],
                    config: dict, meta: dict | None = None) -> Path:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "config": config,
        "meta": meta or {},
        "params": _pack(params),
        "buffers": _pack(buffers),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc))
    return path


def load_checkpoint(path) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != FORMAT:
        raise CheckpointError(f"{path}: not a {FORMAT} file")
    if doc.get("version") != VERSION:
        raise CheckpointError(f"{path}: unsupported version {doc.get('version')}")
    doc["params"] = _unpack(doc["params"])
    doc["buffers"] = _unpack(doc["buffers"])
    return doc


def check_shapes(expected: dict[str, tuple], found: dict[str, np.ndarray], what: str = "parameter") -> None:
    missing = sorted(set(expected) - set(found))
    extra = sorted(set(found) - set(expected))
    if missing or extra:
        raise CheckpointError(f"{what} names differ: missing {missing}, unexpected {extra}")
    for k, shape in expected.items():
        if tuple(found[k].shape) != tuple(shape):
            raise CheckpointError(f"{what} {k}: checkpoint shape {tuple(found[k].shape)} != model shape {tuple(shape)}")
