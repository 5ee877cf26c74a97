"""Clip decoding via OpenCV."""

from __future__ import annotations

from pathlib import Path

import numpy as np

VIDEO_EXTENSIONS = (".mp4", ".avi", ".mkv", ".webm", ".mov")


class DecodeError(Exception):
    pass


def resolve_video_path(videos_root, video_id: str) -> Path:
    """Find <videos_root>/<video_id>.<ext> among the known extensions."""
    root = Path(videos_root)
    for ext in VIDEO_EXTENSIONS:
        candidate = root / f"{video_id}{ext}"
        if candidate.exists():
            return candidate
    raise DecodeError(f"no video file for {video_id!r} under {root}")


def read_clip_frames(path, start: float, end: float, fps: float) -> np.ndarray:
    """Decode frames with indices in [round(start*fps), round(end*fps)).

    The manifest's fps is authoritative over container metadata. Frames
    come back as an (n, height, width, 3) uint8 RGB array.
    """
    import cv2

    first = round(start * fps)
    last = round(end * fps)
    if last <= first:
        raise DecodeError(f"{path}: empty frame range [{first}, {last})")
    cap = cv2.VideoCapture(str(path))
    if not cap.isOpened():
        raise DecodeError(f"{path}: cannot open video")
    frames = []
    index = 0
    try:
        while index < last:
            ok, frame = cap.read()
            if not ok:
                break
            if index >= first:
                frames.append(cv2.cvtColor(frame, cv2.COLOR_BGR2RGB))
            index += 1
    finally:
        cap.release()
    if not frames:
        raise DecodeError(f"{path}: no frames decoded in [{first}, {last})")
    return np.stack(frames)
