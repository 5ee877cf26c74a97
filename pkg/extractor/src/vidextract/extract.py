"""Clip feature extraction into VAEB stores."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .decode import DecodeError, read_clip_frames, resolve_video_path
from .encoders import ImageEncoder, VideoEncoder, load_encoder
from .manifest import ClipRow, read_manifest
from .sampling import uniform_indices
from .vaeb import StoreRecord, write_store

DEFAULT_FRAME_COUNT = 16


class ExtractError(Exception):
    pass


@dataclass(frozen=True)
class ExtractJob:
    manifest_path: str
    encoder_id: str
    out_path: str
    videos_root: str
    frames: int = DEFAULT_FRAME_COUNT
    batch_size: int = 64
    device: str | None = None
    frame_dump_dir: str | None = None


@dataclass(frozen=True)
class ExtractedClip:
    record: StoreRecord
    frames_used: int


def mean_frame_features(frame_features: np.ndarray) -> np.ndarray:
    """Frame average with float64 accumulation in frame order, as float32."""
    acc = np.zeros(frame_features.shape[1], dtype=np.float64)
    for row in frame_features:
        acc += row.astype(np.float64)
    acc /= np.float64(frame_features.shape[0])
    return acc.astype(np.float32)


def extract_clip(
    video_path,
    clip: ClipRow,
    encoder: ImageEncoder | VideoEncoder,
    frames: int = DEFAULT_FRAME_COUNT,
    frame_dump_dir=None,
) -> ExtractedClip:
    """One clip to one embedding record.

    Image encoders embed `frames` uniformly sampled frames and average
    them; video encoders get their native clip input in a single pass.
    """
    try:
        decoded = read_clip_frames(video_path, clip.start, clip.end, clip.fps)
    except DecodeError as exc:
        raise ExtractError(f"clip {clip.clip_id!r}: {exc}") from None

    if encoder.kind == "image":
        idx = uniform_indices(len(decoded), frames)
        per_frame = encoder.embed_frames(decoded[idx])
        vector = mean_frame_features(per_frame)
        if frame_dump_dir is not None:
            dump = Path(frame_dump_dir)
            dump.mkdir(parents=True, exist_ok=True)
            np.savez(dump / f"{clip.clip_id.replace('/', '_')}.npz", frames=per_frame)
        used = len(idx)
    else:
        native = encoder.native_frames
        if len(decoded) < native:
            raise ExtractError(
                f"clip {clip.clip_id!r}: {len(decoded)} frames decoded, "
                f"video encoder needs {native}"
            )
        idx = uniform_indices(len(decoded), native)
        vector = np.asarray(encoder.embed_clip(decoded[idx]), dtype=np.float32)
        used = native

    if vector.ndim != 1 or not np.all(np.isfinite(vector)):
        raise ExtractError(f"clip {clip.clip_id!r}: encoder produced an invalid vector")
    record = StoreRecord(
        id=clip.clip_id, class_label=clip.class_label, source=clip.source, vector=vector
    )
    return ExtractedClip(record=record, frames_used=used)


def extract_all(job: ExtractJob) -> tuple[int, int]:
    """Extract every manifest clip; failures are logged and skipped.

    Writes the store (records sorted by clip id) plus `<out>.skipped.jsonl`
    when anything failed. Returns (extracted, skipped); zero extracted
    clips on a non-empty manifest is an error.
    """
    clips, _ = read_manifest(job.manifest_path)
    encoder = load_encoder(job.encoder_id, device=job.device, batch_size=job.batch_size)

    records: list[StoreRecord] = []
    failures: list[dict] = []
    path_cache: dict[str, Path] = {}
    for clip in clips:
        try:
            if clip.parent not in path_cache:
                path_cache[clip.parent] = resolve_video_path(job.videos_root, clip.parent)
            extracted = extract_clip(
                path_cache[clip.parent],
                clip,
                encoder,
                frames=job.frames,
                frame_dump_dir=job.frame_dump_dir,
            )
            records.append(extracted.record)
        except (ExtractError, DecodeError) as exc:
            failures.append({"clip_id": clip.clip_id, "error": str(exc)})

    if clips and not records:
        raise ExtractError(
            f"all {len(clips)} clips failed; first error: {failures[0]['error']}"
        )
    records.sort(key=lambda rec: rec.id)
    dim = records[0].vector.shape[0] if records else encoder.dim
    write_store(job.out_path, encoder.model_id, dim, records)

    skip_log = Path(f"{job.out_path}.skipped.jsonl")
    if failures:
        skip_log.write_text(
            "\n".join(json.dumps(f) for f in failures) + "\n", encoding="utf-8"
        )
    elif skip_log.exists():
        skip_log.unlink()
    return len(records), len(failures)
