import json

import numpy as np
import pytest

from vidextract.encoders import ImageEncoder, VideoEncoder, register_encoder


def _pool_features(frame: np.ndarray) -> np.ndarray:
    """6x6 block-averaged grayscale, flattened; a stand-in for a backbone."""
    gray = frame.astype(np.float64).mean(axis=2) / 255.0
    rows = np.array_split(gray, 6, axis=0)
    cells = [np.array_split(band, 6, axis=1) for band in rows]
    return np.array([cell.mean() for band in cells for cell in band])


class StubImageEncoder(ImageEncoder):
    """Deterministic projection of pooled pixels; no model downloads."""

    def __init__(self, device=None, batch_size=64):
        rng = np.random.default_rng(202)
        self._proj = rng.normal(size=(36, 12))
        self.dim = 12
        self.model_id = "stub-image+pool6"

    def embed_frames(self, frames):
        feats = np.stack([_pool_features(f) for f in frames])
        return (feats @ self._proj).astype(np.float32)


class StubVideoEncoder(VideoEncoder):
    def __init__(self, device=None, batch_size=64):
        rng = np.random.default_rng(303)
        self._proj = rng.normal(size=(36, 12))
        self.dim = 12
        self.native_frames = 16
        self.model_id = "stub-video+pool6"

    def embed_clip(self, frames):
        pooled = np.stack([_pool_features(f) for f in frames]).mean(axis=0)
        return (pooled @ self._proj).astype(np.float32)


register_encoder("stub-image", StubImageEncoder)
register_encoder("stub-video", StubVideoEncoder)


def write_video(path, frames, fps=8.0):
    import cv2

    height, width = frames[0].shape[:2]
    writer = cv2.VideoWriter(
        str(path), cv2.VideoWriter_fourcc(*"MJPG"), fps, (width, height)
    )
    assert writer.isOpened(), f"cannot open video writer for {path}"
    for frame in frames:
        writer.write(frame)
    writer.release()


def constant_frames(n, value=90, height=48, width=64):
    return [np.full((height, width, 3), value, np.uint8) for _ in range(n)]


def textured_frames(rng, n, height=48, width=64):
    return [
        rng.integers(0, 255, size=(height, width, 3)).astype(np.uint8) for _ in range(n)
    ]


def manifest_row(clip_id, parent, source, label, start, end, fps):
    return {
        "clip_id": clip_id,
        "parent": parent,
        "origin_video_id": parent,
        "source": source,
        "class_label": label,
        "start": start,
        "end": end,
        "fps": fps,
    }


def write_manifest_file(path, rows, clip_length=2.0):
    lines = [json.dumps({"format_version": 1, "clip_length": clip_length})]
    lines += [json.dumps(r) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


@pytest.fixture()
def small_dataset(tmp_path):
    """Three 2-second 8-fps videos (one real, two fake) plus a manifest."""
    rng = np.random.default_rng(11)
    videos = tmp_path / "videos"
    videos.mkdir()
    write_video(videos / "real-0.avi", constant_frames(16, value=120))
    write_video(videos / "gen-0.avi", textured_frames(rng, 16))
    write_video(videos / "gen-1.avi", textured_frames(rng, 16))
    rows = [
        manifest_row("gen-0:0000", "gen-0", "gen-x", "fake", 0.0, 2.0, 8.0),
        manifest_row("gen-1:0000", "gen-1", "gen-x", "fake", 0.0, 2.0, 8.0),
        manifest_row("real-0:0000", "real-0", "youtube-vos", "real", 0.0, 2.0, 8.0),
    ]
    manifest = tmp_path / "manifest.jsonl"
    write_manifest_file(manifest, rows)
    return tmp_path, videos, manifest
