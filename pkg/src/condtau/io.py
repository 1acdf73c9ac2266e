"""Canonical JSON serialisation and run provenance."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _plain(dataclasses.asdict(obj))
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj, indent: int | None = 2) -> str:
    """Deterministic JSON: sorted keys, NaN/inf mapped to null."""
    return json.dumps(_plain(obj), sort_keys=True, indent=indent, allow_nan=False) + "\n"


def config_hash(config: dict) -> str:
    return hashlib.sha256(dumps(config, indent=None).encode()).hexdigest()


def envelope(command: str, config: dict, seed: int | None, **payload) -> dict:
    """Wrap a result with the version, seed and a hash of the resolved configuration."""
    out = {"command": command, "version": __version__, "seed": seed,
           "config": config, "config_hash": config_hash(config)}
    out.update(payload)
    return out


def write_text(path: str | Path | None, text: str) -> None:
    if path is None or str(path) == "-":
        print(text, end="")
    else:
        Path(path).write_text(text, encoding="utf-8")
