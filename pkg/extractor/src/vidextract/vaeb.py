"""Standalone VAEB store writer.

Mirrors the consumer's published binary interface, little-endian:
magic "VAEB", version u32=1, model_id (u16 length + UTF-8), dim u32,
record count u64, then per record: id (u16 + UTF-8), class label u8
(0 real / 1 fake), source (u16 + UTF-8), dim x f32 payload.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

MAGIC = b"VAEB"
FORMAT_VERSION = 1
LABEL_BYTES = {"real": 0, "fake": 1}


@dataclass(frozen=True)
class StoreRecord:
    id: str
    class_label: str  # "real" | "fake"
    source: str
    vector: np.ndarray

    def __post_init__(self):
        if not self.id:
            raise ValueError("record id must be non-empty")
        if self.class_label not in LABEL_BYTES:
            raise ValueError(f"bad class label {self.class_label!r}")
        vec = np.ascontiguousarray(self.vector, dtype=np.float32)
        if vec.ndim != 1 or not np.all(np.isfinite(vec)):
            raise ValueError(f"record {self.id!r}: vector must be 1-D and finite")
        object.__setattr__(self, "vector", vec)


def _pack_str(value: str) -> bytes:
    raw = value.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError("string too long for format")
    return struct.pack("<H", len(raw)) + raw


def store_bytes(model_id: str, dim: int, records: Sequence[StoreRecord]) -> bytes:
    if dim < 1:
        raise ValueError(f"dim must be positive, got {dim}")
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", FORMAT_VERSION)
    out += _pack_str(model_id)
    out += struct.pack("<I", dim)
    out += struct.pack("<Q", len(records))
    seen: set[str] = set()
    for rec in records:
        if rec.vector.shape[0] != dim:
            raise ValueError(
                f"record {rec.id!r} has dim {rec.vector.shape[0]}, store has {dim}"
            )
        if rec.id in seen:
            raise ValueError(f"duplicate record id {rec.id!r}")
        seen.add(rec.id)
        out += _pack_str(rec.id)
        out += struct.pack("<B", LABEL_BYTES[rec.class_label])
        out += _pack_str(rec.source)
        out += rec.vector.astype("<f4", copy=False).tobytes()
    return bytes(out)


def write_store(path, model_id: str, dim: int, records: Sequence[StoreRecord]) -> int:
    payload = store_bytes(model_id, dim, records)
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or Path("."), suffix=".vaeb.tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.chmod(tmp, 0o666 & ~_current_umask())
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return len(payload)


def _current_umask() -> int:
    value = os.umask(0)
    os.umask(value)
    return value
