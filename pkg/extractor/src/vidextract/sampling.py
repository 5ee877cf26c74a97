"""Temporal frame sampling for clips with heterogeneous frame rates."""

from __future__ import annotations


def uniform_indices(available: int, count: int) -> list[int]:
    """`count` frame indices spread uniformly over `available` frames.

    Sources decoded at their native rate expose different frame counts
    per clip; sampling a fixed count keeps features comparable. When
    `available <= count` every frame is used once (no padding, no
    duplicates). Indices are floor(i * available / count), which is the
    identity when the counts match.
    """
    if available < 1:
        raise ValueError(f"no frames to sample (available={available})")
    if count < 1:
        raise ValueError(f"sample count must be >= 1, got {count}")
    if available <= count:
        return list(range(available))
    return [(i * available) // count for i in range(count)]
