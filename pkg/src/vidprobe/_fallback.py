"""Numpy fallback for the compiled kernels.

Implements the exact numerical contract of vidprobe._native: float64
accumulation, sequential in index order, one IEEE rounding per operation.
The loops below run over the feature axis only, so every accumulator still
receives its terms one at a time in index order while numpy vectorizes
across rows/pairs. Outputs are bit-identical to the compiled lane.
"""

from __future__ import annotations

import numpy as np


def mean_rows(rows: np.ndarray) -> np.ndarray:
    acc = np.zeros(rows.shape[1], dtype=np.float64)
    for i in range(rows.shape[0]):
        acc += rows[i].astype(np.float64)
    acc /= np.float64(rows.shape[0])
    return acc.astype(np.float32)


def euclidean(a: np.ndarray, b: np.ndarray) -> float:
    sq = (a.astype(np.float64) - b.astype(np.float64)) ** 2
    acc = 0.0
    for v in sq:
        acc += float(v)
    return float(np.sqrt(acc))


def nearest_scan(
    tests: np.ndarray, refs: np.ndarray, labels: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    t_count = tests.shape[0]
    acc = np.zeros((t_count, refs.shape[0]), dtype=np.float64)
    for j in range(tests.shape[1]):
        diff = tests[:, j].astype(np.float64)[:, None] - refs[:, j].astype(np.float64)[None, :]
        acc += diff * diff
    dist = np.sqrt(acc)

    idx = np.argmin(dist, axis=1).astype(np.int64)  # first minimum wins ties
    nearest = dist[np.arange(t_count), idx]

    real_mask = labels == 0
    inf_col = np.full((t_count, 1), np.inf)
    min_real = np.min(np.concatenate([dist[:, real_mask], inf_col], axis=1), axis=1)
    min_fake = np.min(np.concatenate([dist[:, ~real_mask], inf_col], axis=1), axis=1)
    return idx, nearest, min_real, min_fake
