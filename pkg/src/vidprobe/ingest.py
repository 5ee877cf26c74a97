"""Dataset manifests: clip boundaries, per-source statistics, JSONL persistence.

A manifest catalogs full-length videos and the fixed-length clips cut from
them. Clips inherit source, class label, and fps from their parent video;
origin_video_id groups clips of the same parent so train/test splits can
keep shared content on one side.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .store import ClassLabel

MANIFEST_FORMAT_VERSION = 1
DEFAULT_CLIP_LENGTH = 2.0
DEFAULT_REAL_SOURCES = frozenset({"youtube-vos"})

# Fake sources the toolkit knows about; reports render these in a fixed order.
KNOWN_FAKE_SOURCES = (
    "latte",
    "modelscope",
    "opensora",
    "zeroscope",
    "text2video",
    "veo",
    "sora",
    "dreammachine",
    "videopoet",
)

SOURCE_DISPLAY_NAMES = {
    "latte": "Latte",
    "modelscope": "ModelScope",
    "opensora": "OpenSora",
    "zeroscope": "ZeroScope",
    "text2video": "Text2Video",
    "veo": "Veo",
    "sora": "Sora",
    "dreammachine": "Dream Machine",
    "videopoet": "Video Poet",
    "youtube-vos": "YouTube-VOS",
}


class ManifestError(Exception):
    """Invalid listing input or manifest file."""


@dataclass(frozen=True)
class VideoEntry:
    video_id: str
    source: str
    class_label: ClassLabel
    duration: float
    fps: float
    origin_video_id: str

    def __post_init__(self):
        if self.duration <= 0:
            raise ManifestError(f"video {self.video_id!r}: duration must be > 0")
        if self.fps <= 0:
            raise ManifestError(f"video {self.video_id!r}: fps must be > 0")


@dataclass(frozen=True)
class ClipEntry:
    clip_id: str
    parent: str
    start: float
    end: float


@dataclass(frozen=True)
class ClipView:
    """A clip joined with its parent's metadata; the manifest row shape."""

    clip_id: str
    parent: str
    origin_video_id: str
    source: str
    class_label: ClassLabel
    start: float
    end: float
    fps: float


@dataclass(frozen=True)
class IngestConfig:
    clip_length: float = DEFAULT_CLIP_LENGTH
    real_sources: frozenset[str] = DEFAULT_REAL_SOURCES
    allow_unknown_source: bool = False


def compute_clip_boundaries(duration: float, clip_length: float = DEFAULT_CLIP_LENGTH):
    """Consecutive [k*L, (k+1)*L) intervals inside [0, duration].

    The trailing remainder shorter than clip_length is dropped, so the
    count is floor(duration / clip_length).
    """
    if duration <= 0:
        raise ValueError(f"duration must be > 0, got {duration}")
    if clip_length <= 0:
        raise ValueError(f"clip_length must be > 0, got {clip_length}")
    n = int(math.floor(duration / clip_length))
    return [(k * clip_length, (k + 1) * clip_length) for k in range(n)]


class Manifest:
    """Videos plus their clips; immutable after construction."""

    def __init__(
        self,
        videos: Iterable[VideoEntry],
        clips: Iterable[ClipEntry],
        clip_length: float = DEFAULT_CLIP_LENGTH,
    ):
        self.videos: tuple[VideoEntry, ...] = tuple(videos)
        self.clips: tuple[ClipEntry, ...] = tuple(clips)
        self.clip_length = float(clip_length)
        self._video_by_id = {}
        for vid in self.videos:
            if vid.video_id in self._video_by_id:
                raise ManifestError(f"duplicate video id {vid.video_id!r}")
            self._video_by_id[vid.video_id] = vid
        self._validate_clips()
        self._views: tuple[ClipView, ...] | None = None

    def _validate_clips(self):
        tol = 1e-9
        by_parent: dict[str, list[ClipEntry]] = {}
        seen: set[str] = set()
        for clip in self.clips:
            if clip.clip_id in seen:
                raise ManifestError(f"duplicate clip id {clip.clip_id!r}")
            seen.add(clip.clip_id)
            parent = self._video_by_id.get(clip.parent)
            if parent is None:
                raise ManifestError(f"clip {clip.clip_id!r}: unknown parent {clip.parent!r}")
            if clip.start < -tol or clip.end > parent.duration + tol:
                raise ManifestError(
                    f"clip {clip.clip_id!r}: interval [{clip.start}, {clip.end}] "
                    f"outside parent duration {parent.duration}"
                )
            if abs((clip.end - clip.start) - self.clip_length) > tol * max(1.0, self.clip_length):
                raise ManifestError(
                    f"clip {clip.clip_id!r}: length {clip.end - clip.start} "
                    f"!= clip_length {self.clip_length}"
                )
            by_parent.setdefault(clip.parent, []).append(clip)
        for parent_id, group in by_parent.items():
            for prev, cur in zip(group, group[1:]):
                if cur.start < prev.end - tol:
                    raise ManifestError(
                        f"clips of {parent_id!r} overlap or are out of order "
                        f"({prev.clip_id!r}, {cur.clip_id!r})"
                    )

    def video(self, video_id: str) -> VideoEntry:
        return self._video_by_id[video_id]

    def clip_views(self) -> tuple[ClipView, ...]:
        if self._views is None:
            self._views = tuple(
                ClipView(
                    clip_id=c.clip_id,
                    parent=c.parent,
                    origin_video_id=self._video_by_id[c.parent].origin_video_id,
                    source=self._video_by_id[c.parent].source,
                    class_label=self._video_by_id[c.parent].class_label,
                    start=c.start,
                    end=c.end,
                    fps=self._video_by_id[c.parent].fps,
                )
                for c in self.clips
            )
        return self._views

    def sources(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for vid in self.videos:
            seen.setdefault(vid.source, None)
        return tuple(seen)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Manifest):
            return NotImplemented
        return (
            self.clip_length == other.clip_length
            and self.videos == other.videos
            and self.clips == other.clips
        )


def _label_for_source(source: str, config: IngestConfig) -> ClassLabel:
    return ClassLabel.REAL if source in config.real_sources else ClassLabel.FAKE


def build_manifest(listing: Sequence[Mapping], config: IngestConfig = IngestConfig()) -> Manifest:
    """Build a manifest from video listing entries.

    Each entry needs video_id, source, duration, and fps; origin_video_id
    defaults to the video's own id. Unknown sources are rejected unless
    config.allow_unknown_source is set. An explicit class_label in an
    entry must agree with the one derived from the source.
    """
    known = set(config.real_sources) | set(KNOWN_FAKE_SOURCES)
    videos: list[VideoEntry] = []
    clips: list[ClipEntry] = []
    for entry in listing:
        try:
            video_id = str(entry["video_id"])
            source = str(entry["source"])
            duration = float(entry["duration"])
            fps = float(entry["fps"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"bad listing entry {entry!r}: {exc}") from None
        if source not in known and not config.allow_unknown_source:
            raise ManifestError(
                f"unknown source {source!r} for video {video_id!r} "
                "(pass allow_unknown_source to accept)"
            )
        label = _label_for_source(source, config)
        if "class_label" in entry and entry["class_label"] is not None:
            stated = ClassLabel.from_str(str(entry["class_label"]))
            if stated != label:
                raise ManifestError(
                    f"video {video_id!r}: stated label {stated} conflicts with "
                    f"source {source!r} ({label})"
                )
        origin = str(entry.get("origin_video_id") or video_id)
        videos.append(VideoEntry(video_id, source, label, duration, fps, origin))
        for k, (start, end) in enumerate(compute_clip_boundaries(duration, config.clip_length)):
            clips.append(ClipEntry(f"{video_id}:{k:04d}", video_id, start, end))
    return Manifest(videos, clips, config.clip_length)


@dataclass
class SourceStats:
    clips: int = 0
    minutes: float = 0.0


def manifest_stats(manifest: Manifest) -> dict[str, SourceStats]:
    """Clip count and total clip minutes per source, in manifest order."""
    stats: dict[str, SourceStats] = {}
    for view in manifest.clip_views():
        entry = stats.setdefault(view.source, SourceStats())
        entry.clips += 1
        entry.minutes += (view.end - view.start) / 60.0
    return stats


def write_manifest(manifest: Manifest, path) -> None:
    lines = [
        json.dumps(
            {"format_version": MANIFEST_FORMAT_VERSION, "clip_length": manifest.clip_length}
        )
    ]
    for v in manifest.clip_views():
        lines.append(
            json.dumps(
                {
                    "clip_id": v.clip_id,
                    "parent": v.parent,
                    "origin_video_id": v.origin_video_id,
                    "source": v.source,
                    "class_label": str(v.class_label),
                    "start": v.start,
                    "end": v.end,
                    "fps": v.fps,
                }
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_manifest(path) -> Manifest:
    """Load a manifest written by write_manifest.

    Parent video durations are reconstructed as the largest clip end time,
    which is sufficient for splitting and statistics.
    """
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ManifestError(f"{path}: empty manifest file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}:1: bad header: {exc}") from None
    if not isinstance(header, dict) or "format_version" not in header:
        raise ManifestError(f"{path}:1: missing format_version header")
    if header["format_version"] != MANIFEST_FORMAT_VERSION:
        raise ManifestError(f"{path}: unsupported manifest version {header['format_version']}")
    clip_length = float(header.get("clip_length", DEFAULT_CLIP_LENGTH))

    clips: list[ClipEntry] = []
    parents: dict[str, dict] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            row = json.loads(line)
            view = ClipView(
                clip_id=str(row["clip_id"]),
                parent=str(row["parent"]),
                origin_video_id=str(row["origin_video_id"]),
                source=str(row["source"]),
                class_label=ClassLabel.from_str(row["class_label"]),
                start=float(row["start"]),
                end=float(row["end"]),
                fps=float(row["fps"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"{path}:{lineno}: bad clip row: {exc}") from None
        clips.append(ClipEntry(view.clip_id, view.parent, view.start, view.end))
        meta = parents.setdefault(
            view.parent,
            {
                "source": view.source,
                "class_label": view.class_label,
                "fps": view.fps,
                "origin": view.origin_video_id,
                "duration": view.end,
            },
        )
        if (meta["source"], meta["class_label"], meta["fps"], meta["origin"]) != (
            view.source,
            view.class_label,
            view.fps,
            view.origin_video_id,
        ):
            raise ManifestError(
                f"{path}:{lineno}: clip {view.clip_id!r} disagrees with earlier "
                f"rows of parent {view.parent!r}"
            )
        meta["duration"] = max(meta["duration"], view.end)

    videos = [
        VideoEntry(
            video_id=pid,
            source=m["source"],
            class_label=m["class_label"],
            duration=m["duration"],
            fps=m["fps"],
            origin_video_id=m["origin"],
        )
        for pid, m in parents.items()
    ]
    return Manifest(videos, clips, clip_length)


def read_listing(path) -> list[dict]:
    """Parse a video listing file: one JSON object per line."""
    entries = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: bad JSON: {exc}") from None
        if not isinstance(entry, dict):
            raise ManifestError(f"{path}:{lineno}: expected a JSON object")
        entries.append(entry)
    return entries
