"""Kernel backend selection.

Two interchangeable lanes implement the vector hot paths: a compiled
Cython extension (vidprobe._native) and a numpy fallback
(vidprobe._fallback). Both follow the same numerical contract (float64
accumulation, sequential index order) and produce bit-identical results,
so the choice only affects speed. The compiled lane is preferred when it
imported successfully; set VIDPROBE_NO_NATIVE=1 to force the fallback.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager

import numpy as np

from . import _fallback

try:
    from . import _native
except ImportError:  # extension not built on this platform
    _native = None

_BACKENDS = {"numpy": _fallback}
if _native is not None:
    _BACKENDS["native"] = _native

if _native is not None and not os.environ.get("VIDPROBE_NO_NATIVE"):
    _current = "native"
else:
    _current = "numpy"


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def get_backend() -> str:
    return _current


def set_backend(name: str) -> None:
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; available: {available_backends()}")
    global _current
    _current = name


@contextmanager
def use_backend(name: str):
    previous = _current
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def _mod():
    return _BACKENDS[_current]


def _as_f32_matrix(arr: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(arr, dtype=np.float32)


def average_rows(rows: np.ndarray) -> np.ndarray:
    """Column-wise float32 mean of an N x D float matrix (N >= 1)."""
    return _mod().mean_rows(_as_f32_matrix(rows))


def euclidean(a: np.ndarray, b: np.ndarray) -> float:
    """Euclidean distance between two equal-length vectors, in float64."""
    return float(
        _mod().euclidean(
            np.ascontiguousarray(a, dtype=np.float32),
            np.ascontiguousarray(b, dtype=np.float32),
        )
    )


def nearest_scan(
    tests: np.ndarray,
    refs: np.ndarray,
    labels: np.ndarray,
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Exhaustive nearest-reference scan over all (test, reference) pairs.

    Returns per-test arrays (nearest_index, nearest_distance,
    min_real_distance, min_fake_distance). Ties keep the lowest reference
    index; an absent class yields +inf. Parallel chunks change nothing
    numerically: each test row is computed independently, so any `threads`
    value gives bit-identical output in input order.
    """
    tests = _as_f32_matrix(tests)
    refs = _as_f32_matrix(refs)
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    if tests.shape[0] == 0:
        empty_i = np.empty(0, dtype=np.int64)
        empty_f = np.empty(0, dtype=np.float64)
        return empty_i, empty_f.copy(), empty_f.copy(), empty_f.copy()

    mod = _mod()
    threads = max(1, min(int(threads), tests.shape[0]))
    if threads == 1:
        return mod.nearest_scan(tests, refs, labels)

    bounds = np.linspace(0, tests.shape[0], threads + 1).astype(int)
    chunks = [tests[bounds[k]:bounds[k + 1]] for k in range(threads)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda c: mod.nearest_scan(c, refs, labels), chunks))
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(4))
