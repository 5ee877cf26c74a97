"""Reader for the clip-manifest interchange format.

One JSON header line carrying format_version and clip_length, then one
JSON object per clip with clip_id, parent, origin_video_id, source,
class_label ("real" | "fake"), start, end, fps.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path


class ManifestFormatError(Exception):
    pass


@dataclass(frozen=True)
class ClipRow:
    clip_id: str
    parent: str
    origin_video_id: str
    source: str
    class_label: str
    start: float
    end: float
    fps: float


def read_manifest(path) -> tuple[list[ClipRow], float]:
    lines = [
        ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()
    ]
    if not lines:
        raise ManifestFormatError(f"{path}: empty manifest")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ManifestFormatError(f"{path}:1: bad header: {exc}") from None
    if not isinstance(header, dict) or header.get("format_version") != 1:
        raise ManifestFormatError(f"{path}: missing or unsupported format_version header")
    clip_length = float(header.get("clip_length", 2.0))
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            obj = json.loads(line)
            row = ClipRow(
                clip_id=str(obj["clip_id"]),
                parent=str(obj["parent"]),
                origin_video_id=str(obj["origin_video_id"]),
                source=str(obj["source"]),
                class_label=str(obj["class_label"]),
                start=float(obj["start"]),
                end=float(obj["end"]),
                fps=float(obj["fps"]),
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise ManifestFormatError(f"{path}:{lineno}: bad clip row: {exc}") from None
        if row.class_label not in ("real", "fake"):
            raise ManifestFormatError(
                f"{path}:{lineno}: bad class_label {row.class_label!r}"
            )
        rows.append(row)
    return rows, clip_length
