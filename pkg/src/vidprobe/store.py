"""Embedding records and the VAEB on-disk store format.

A store holds one encoder's feature vectors for a set of video clips,
each tagged with a class label (real or fake) and the source that
produced the clip. Vectors are float32 payloads; all arithmetic on them
accumulates in float64 (see vidprobe.kernels).

VAEB binary layout, little-endian throughout:

    magic   4 bytes ASCII "VAEB"
    version u32 = 1
    model_id u16 length + UTF-8 bytes
    dim     u32
    count   u64
    then `count` records, each:
        id          u16 length + UTF-8 bytes
        class_label u8 (0 = real, 1 = fake)
        source      u16 length + UTF-8 bytes
        vector      dim x f32
"""

from __future__ import annotations

import enum
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import kernels

MAGIC = b"VAEB"
FORMAT_VERSION = 1


class StoreError(Exception):
    """Base class for store format failures."""


class UnsupportedFormatError(StoreError):
    """Bad magic bytes or an unknown format version."""


class CorruptStoreError(StoreError):
    """Truncated or internally inconsistent store bytes."""


class DuplicateRecordError(StoreError):
    """Two records share an id."""


class ClassLabel(enum.IntEnum):
    REAL = 0
    FAKE = 1

    @classmethod
    def from_byte(cls, value: int) -> "ClassLabel":
        if value not in (0, 1):
            raise ValueError(f"invalid class label byte {value}")
        return cls(value)

    @classmethod
    def from_str(cls, value: str) -> "ClassLabel":
        try:
            return {"real": cls.REAL, "fake": cls.FAKE}[value]
        except KeyError:
            raise ValueError(f"invalid class label {value!r}") from None

    def __str__(self) -> str:
        return "real" if self is ClassLabel.REAL else "fake"


def _frozen_f32(vector) -> np.ndarray:
    arr = np.ascontiguousarray(vector, dtype=np.float32)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class EmbeddingRecord:
    """One clip's feature vector with identity, label, and source."""

    id: str
    class_label: ClassLabel
    source: str
    vector: np.ndarray = field(compare=False)

    def __post_init__(self):
        if not self.id:
            raise ValueError("record id must be non-empty")
        vec = _frozen_f32(self.vector)
        if vec.ndim != 1:
            raise ValueError(f"record {self.id!r}: vector must be 1-D")
        if not np.all(np.isfinite(vec)):
            raise ValueError(f"record {self.id!r}: invalid feature (non-finite entry)")
        object.__setattr__(self, "vector", vec)
        object.__setattr__(self, "class_label", ClassLabel(self.class_label))

    @property
    def dim(self) -> int:
        return self.vector.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingRecord):
            return NotImplemented
        return (
            self.id == other.id
            and self.class_label == other.class_label
            and self.source == other.source
            and self.vector.tobytes() == other.vector.tobytes()
        )


class EmbeddingStore:
    """Immutable, ordered collection of records sharing one dimension."""

    def __init__(self, model_id: str, dim: int, records: Iterable[EmbeddingRecord] = ()):
        if dim < 1:
            raise ValueError(f"dim must be positive, got {dim}")
        self.model_id = model_id
        self.dim = int(dim)
        self.records: tuple[EmbeddingRecord, ...] = tuple(records)
        seen: set[str] = set()
        for rec in self.records:
            if rec.dim != self.dim:
                raise ValueError(
                    f"dimension mismatch: record {rec.id!r} has dim {rec.dim}, store has {self.dim}"
                )
            if rec.id in seen:
                raise DuplicateRecordError(f"duplicate record id {rec.id!r}")
            seen.add(rec.id)
        self._by_id = {rec.id: rec for rec in self.records}
        self._matrix: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[EmbeddingRecord]:
        return iter(self.records)

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingStore):
            return NotImplemented
        return (
            self.model_id == other.model_id
            and self.dim == other.dim
            and self.records == other.records
        )

    def get(self, record_id: str) -> EmbeddingRecord | None:
        return self._by_id.get(record_id)

    def ids(self) -> tuple[str, ...]:
        return tuple(rec.id for rec in self.records)

    def matrix(self) -> np.ndarray:
        """All vectors as a read-only (len, dim) float32 matrix."""
        if self._matrix is None:
            if self.records:
                mat = np.stack([rec.vector for rec in self.records])
            else:
                mat = np.empty((0, self.dim), dtype=np.float32)
            mat.setflags(write=False)
            self._matrix = mat
        return self._matrix

    def labels(self) -> np.ndarray:
        return np.array([int(rec.class_label) for rec in self.records], dtype=np.uint8)

    def sources(self) -> tuple[str, ...]:
        return tuple(rec.source for rec in self.records)

    def subset(self, ids: Sequence[str]) -> "EmbeddingStore":
        """Records for the given ids, in the given order. Missing ids raise."""
        missing = [i for i in ids if i not in self._by_id]
        if missing:
            raise KeyError(f"missing embeddings for {len(missing)} clip(s): {missing[:10]}")
        return EmbeddingStore(self.model_id, self.dim, [self._by_id[i] for i in ids])


def average_frame_features(frames) -> np.ndarray:
    """Mean of per-frame feature rows; the video-level feature vector.

    Accepts an N x D matrix (N >= 1). Accumulation is float64 in frame
    order with the result rounded to float32, the store payload precision.
    """
    arr = np.asarray(frames, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("frame block must be a 2-D matrix of N frames x D features")
    if arr.shape[0] < 1:
        raise ValueError("no frames")
    if not np.all(np.isfinite(arr)):
        raise ValueError("invalid feature (non-finite entry in frame block)")
    return kernels.average_rows(arr)


def l2_normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """Unit-normalize rows in float64; zero rows pass through unchanged.

    Off by default everywhere: classifiers consume raw features, this
    exists behind explicit normalize flags for experimentation.
    """
    mat = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    return mat / norms


def euclidean_distance(a, b) -> float:
    """Euclidean distance between two vectors at store (float32) precision."""
    av = np.asarray(a, dtype=np.float64).reshape(-1)
    bv = np.asarray(b, dtype=np.float64).reshape(-1)
    if av.shape[0] != bv.shape[0]:
        raise ValueError(f"dimension mismatch: {av.shape[0]} vs {bv.shape[0]}")
    if not (np.all(np.isfinite(av)) and np.all(np.isfinite(bv))):
        raise ValueError("invalid feature (non-finite entry)")
    return kernels.euclidean(av, bv)


def _pack_str(value: str) -> bytes:
    raw = value.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError(f"string too long for format: {len(raw)} bytes")
    return struct.pack("<H", len(raw)) + raw


def store_to_bytes(store: EmbeddingStore) -> bytes:
    out = bytearray()
    out += MAGIC
    out += struct.pack("<I", FORMAT_VERSION)
    out += _pack_str(store.model_id)
    out += struct.pack("<I", store.dim)
    out += struct.pack("<Q", len(store.records))
    for rec in store.records:
        out += _pack_str(rec.id)
        out += struct.pack("<B", int(rec.class_label))
        out += _pack_str(rec.source)
        out += rec.vector.astype("<f4", copy=False).tobytes()
    return bytes(out)


def write_store(store: EmbeddingStore, destination) -> int:
    """Serialize a store. Path writes are atomic (temp file + rename).

    Returns the number of bytes written.
    """
    payload = store_to_bytes(store)
    if hasattr(destination, "write"):
        destination.write(payload)
        return len(payload)
    _atomic_write_bytes(Path(destination), payload, suffix=".vaeb.tmp")
    return len(payload)


def _atomic_write_bytes(path: Path, payload: bytes, suffix: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=suffix)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.chmod(tmp, 0o666 & ~_current_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _current_umask() -> int:
    value = os.umask(0)
    os.umask(value)
    return value


class _Cursor:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptStoreError(
                f"corrupt store: truncated at byte {self.pos} (needed {n} more)"
            )
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def string(self) -> str:
        raw = self.take(self.u16())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise CorruptStoreError(f"corrupt store: bad UTF-8 at byte {self.pos}") from exc

    def done(self) -> bool:
        return self.pos == len(self.data)


def store_from_bytes(data: bytes) -> EmbeddingStore:
    cur = _Cursor(data)
    if len(data) < 4 or cur.take(4) != MAGIC:
        raise UnsupportedFormatError("unsupported format: bad magic bytes")
    version = cur.u32()
    if version != FORMAT_VERSION:
        raise UnsupportedFormatError(f"unsupported format: version {version}")
    model_id = cur.string()
    dim = cur.u32()
    if dim < 1:
        raise CorruptStoreError(f"corrupt store: dim {dim}")
    count = cur.u64()
    records = []
    seen: set[str] = set()
    for _ in range(count):
        rec_id = cur.string()
        label_byte = cur.u8()
        if label_byte not in (0, 1):
            raise CorruptStoreError(
                f"corrupt store: record {rec_id!r} has class label byte {label_byte}"
            )
        source = cur.string()
        vec = np.frombuffer(cur.take(4 * dim), dtype="<f4").copy()
        if rec_id in seen:
            raise DuplicateRecordError(f"duplicate record id {rec_id!r}")
        seen.add(rec_id)
        if not rec_id:
            raise CorruptStoreError("corrupt store: empty record id")
        if not np.all(np.isfinite(vec)):
            raise CorruptStoreError(f"corrupt store: record {rec_id!r} has non-finite entries")
        records.append(EmbeddingRecord(rec_id, ClassLabel(label_byte), source, vec))
    if not cur.done():
        raise CorruptStoreError(f"corrupt store: {len(data) - cur.pos} trailing bytes")
    return EmbeddingStore(model_id, dim, records)


def read_store(source) -> EmbeddingStore:
    """Parse a VAEB store from a path, bytes, or binary file object."""
    if isinstance(source, (bytes, bytearray, memoryview)):
        data = bytes(source)
    elif hasattr(source, "read"):
        data = source.read()
    else:
        data = Path(source).read_bytes()
    return store_from_bytes(data)
