"""Byte-deterministic on-disk archives for named arrays plus JSON metadata.

Checkpoints, vocoder states, and conversion artifacts all round-trip through
this module.  ``np.savez`` writes fixed zip timestamps, so two archives built
from equal inputs are identical files; reproducibility checks compare bytes.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .errors import ValidationError

_META_KEY = "__meta_json__"


def _canonical_json(meta: dict[str, Any]) -> bytes:
    return json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")


def save_archive(path: str | Path, arrays: dict[str, np.ndarray], meta: dict[str, Any]) -> None:
    """Write named arrays and a JSON metadata blob to ``path``.

    Arrays are stored under their given names in sorted order; key order never
    influences the bytes on disk.
    """
    for name in arrays:
        if name == _META_KEY:
            raise ValidationError(f"array name {name!r} is reserved")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {name: np.ascontiguousarray(arrays[name]) for name in sorted(arrays)}
    payload[_META_KEY] = np.frombuffer(_canonical_json(meta), dtype=np.uint8)
    with open(path, "wb") as fh:
        np.savez(fh, **payload)


def load_archive(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    """Read back arrays and metadata written by :func:`save_archive`."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"archive not found: {path}")
    with np.load(path) as npz:
        if _META_KEY not in npz.files:
            raise ValidationError(f"{path} is not a toolkit archive (missing metadata entry)")
        meta = json.loads(bytes(npz[_META_KEY].tobytes()).decode("utf-8"))
        arrays = {name: npz[name] for name in npz.files if name != _META_KEY}
    return arrays, meta
