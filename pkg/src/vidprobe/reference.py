"""Training-free classification by nearest reference embedding.

A test vector takes the class label of the reference vector at minimum
Euclidean distance. The scan is exact and exhaustive; ties on exactly
equal distances keep the earliest reference. Per-class minimum distances
are reported alongside the decision for analysis.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .store import ClassLabel, EmbeddingRecord, l2_normalize_rows


@dataclass(frozen=True)
class ReferenceIndex:
    """Immutable reference set in insertion order (order breaks ties)."""

    vectors: np.ndarray  # (R, D) float32, read-only
    labels: np.ndarray  # (R,) uint8, read-only
    sources: tuple[str, ...]
    ids: tuple[str, ...]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True)
class Prediction:
    label: ClassLabel
    nearest_index: int
    nearest_distance: float
    min_real_distance: float
    min_fake_distance: float


def _l2_normalize(matrix: np.ndarray) -> np.ndarray:
    return l2_normalize_rows(matrix).astype(np.float32)


def build_index(
    refs: Iterable[EmbeddingRecord],
    strict: bool = False,
    normalize: bool = False,
) -> ReferenceIndex:
    """Build a reference index from labeled records.

    With strict=True a reference set missing one of the two classes is an
    error; otherwise it only warns. normalize applies L2 normalization to
    the reference vectors (off by default; raw features are the standard
    behavior, and queries are normalized the same way at classify time).
    """
    records = list(refs)
    if not records:
        raise ValueError("reference set is empty")
    dim = records[0].dim
    for rec in records:
        if rec.dim != dim:
            raise ValueError(
                f"dimension mismatch: record {rec.id!r} has dim {rec.dim}, expected {dim}"
            )
    vectors = np.stack([rec.vector for rec in records])
    if normalize:
        vectors = _l2_normalize(vectors)
    vectors.setflags(write=False)
    labels = np.array([int(rec.class_label) for rec in records], dtype=np.uint8)
    labels.setflags(write=False)
    present = set(labels.tolist())
    if present != {0, 1}:
        missing = "real" if 0 not in present else "fake"
        message = f"reference set has no {missing} references"
        if strict:
            raise ValueError(message)
        warnings.warn(message)
    return ReferenceIndex(
        vectors=vectors,
        labels=labels,
        sources=tuple(rec.source for rec in records),
        ids=tuple(rec.id for rec in records),
    )


def _scan(tests: np.ndarray, index: ReferenceIndex, threads: int = 1):
    if tests.shape[1] != index.dim:
        raise ValueError(f"dimension mismatch: test dim {tests.shape[1]}, index dim {index.dim}")
    return kernels.nearest_scan(tests, index.vectors, index.labels, threads=threads)


def classify(test, index: ReferenceIndex, normalize: bool = False) -> Prediction:
    """Label one test vector by its nearest reference."""
    vec = np.asarray(test, dtype=np.float32).reshape(1, -1)
    if normalize:
        vec = _l2_normalize(vec)
    idx, dist, min_real, min_fake = _scan(vec, index)
    return Prediction(
        label=ClassLabel(int(index.labels[idx[0]])),
        nearest_index=int(idx[0]),
        nearest_distance=float(dist[0]),
        min_real_distance=float(min_real[0]),
        min_fake_distance=float(min_fake[0]),
    )


def classify_batch(
    tests: Sequence[EmbeddingRecord],
    index: ReferenceIndex,
    threads: int = 1,
    normalize: bool = False,
) -> list[Prediction]:
    """Classify records in order; results match per-item classify exactly."""
    records = list(tests)
    if not records:
        return []
    for rec in records:
        if rec.dim != index.dim:
            raise ValueError(
                f"dimension mismatch: test record {rec.id!r} has dim {rec.dim}, "
                f"index dim {index.dim}"
            )
    matrix = np.stack([rec.vector for rec in records])
    if normalize:
        matrix = _l2_normalize(matrix)
    idx, dist, min_real, min_fake = _scan(matrix, index, threads=threads)
    return [
        Prediction(
            label=ClassLabel(int(index.labels[idx[t]])),
            nearest_index=int(idx[t]),
            nearest_distance=float(dist[t]),
            min_real_distance=float(min_real[t]),
            min_fake_distance=float(min_fake[t]),
        )
        for t in range(len(records))
    ]
