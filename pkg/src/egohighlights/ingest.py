"""Frame corpus loading and GPS-interval filtering.

A corpus is a manifest of sources, each a directory of pre-extracted frames
(`frame_%08d.png` style names).  Frames are decoded once, downscaled to the
analysis resolution, and streamed in (source, index) order; album export
goes back to the original files.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np
from PIL import Image

logger = logging.getLogger(__name__)

FRAME_SUFFIXES = (".png", ".jpg", ".jpeg")
_INDEX_RE = re.compile(r"(\d+)")

DEFAULT_ANALYSIS_MAX_SIDE = 480


class EmptyCorpusError(RuntimeError):
    """No frame could be decoded from any source."""


@dataclass
class FrameRecord:
    index: int
    source_id: str
    timestamp: float
    raster: np.ndarray  # HxWx3 uint8, analysis resolution
    gps_linked: bool = False
    path: Optional[Path] = None  # original-resolution file, kept for export


@dataclass
class SourceSpec:
    source_id: str
    path: Path
    start: float = 0.0
    fps: float = 30.0

    def __post_init__(self):
        if self.fps <= 0:
            raise ValueError(f"source {self.source_id}: fps must be > 0")


@dataclass
class CorpusManifest:
    sources: list[SourceSpec]
    gps_track: Optional[Path] = None

    def __post_init__(self):
        ids = [s.source_id for s in self.sources]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate source ids in manifest")


def load_manifest(path: Path | str) -> CorpusManifest:
    path = Path(path)
    doc = json.loads(path.read_text())
    sources = [
        SourceSpec(
            source_id=s["source_id"],
            path=(path.parent / s["path"]).resolve() if not Path(s["path"]).is_absolute()
            else Path(s["path"]),
            start=float(s.get("start", 0.0)),
            fps=float(s.get("fps", 30.0)),
        )
        for s in doc["sources"]
    ]
    track = doc.get("gps_track")
    if track is not None:
        track = Path(track)
        if not track.is_absolute():
            track = (path.parent / track).resolve()
    return CorpusManifest(sources=sources, gps_track=track)


def _frame_files(directory: Path) -> list[Path]:
    files = [p for p in directory.iterdir()
             if p.is_file() and p.suffix.lower() in FRAME_SUFFIXES]
    return sorted(files, key=lambda p: p.name)


def _frame_index(path: Path, position: int) -> int:
    m = _INDEX_RE.search(path.stem)
    return int(m.group(1)) if m else position


def analysis_size(w: int, h: int, max_side: int) -> tuple[int, int]:
    longest = max(w, h)
    if longest <= max_side:
        return w, h
    scale = max_side / longest
    return max(1, round(w * scale)), max(1, round(h * scale))


def decode_frame(path: Path, max_side: int = DEFAULT_ANALYSIS_MAX_SIDE) -> np.ndarray:
    with Image.open(path) as img:
        img = img.convert("RGB")
        w, h = analysis_size(img.width, img.height, max_side)
        if (w, h) != (img.width, img.height):
            img = img.resize((w, h), Image.Resampling.BILINEAR)
        raster = np.asarray(img, dtype=np.uint8)
    if raster.shape[0] < 32 or raster.shape[1] < 32:
        raise ValueError(f"{path}: frame smaller than 32x32")
    return raster


def iter_frames(
    manifest: CorpusManifest,
    max_side: int = DEFAULT_ANALYSIS_MAX_SIDE,
    decode_errors: Optional[list] = None,
) -> Iterator[FrameRecord]:
    """Yield frames per source, never interleaved, timestamps start + index/fps.

    Undecodable files are logged, recorded in `decode_errors` when given, and
    skipped; the surviving stream keeps the file's positional index so its
    timestamp stays true.  An entirely empty corpus raises EmptyCorpusError.
    """
    yielded = 0
    for src in manifest.sources:
        if not src.path.is_dir():
            raise FileNotFoundError(f"source directory missing: {src.path}")
        for position, file in enumerate(_frame_files(src.path)):
            idx = _frame_index(file, position)
            try:
                raster = decode_frame(file, max_side)
            except Exception as exc:
                logger.warning("skipping %s: %s", file, exc)
                if decode_errors is not None:
                    decode_errors.append((src.source_id, file, str(exc)))
                continue
            yield FrameRecord(
                index=idx,
                source_id=src.source_id,
                timestamp=src.start + idx / src.fps,
                raster=raster,
                path=file,
            )
            yielded += 1
    if yielded == 0:
        raise EmptyCorpusError("no decodable frames in corpus")


def load_corpus(
    manifest: CorpusManifest,
    max_side: int = DEFAULT_ANALYSIS_MAX_SIDE,
    decode_errors: Optional[list] = None,
) -> list[FrameRecord]:
    return list(iter_frames(manifest, max_side, decode_errors))


def filter_by_intervals(
    frames: Iterable[FrameRecord],
    intervals: Sequence[tuple[float, float]],
) -> Iterator[FrameRecord]:
    """Keep frames whose timestamp falls inside some [start, end] interval.

    Survivors are marked gps_linked.  Intervals must be sorted and disjoint.
    """
    spans = list(intervals)
    for frame in frames:
        t = frame.timestamp
        for start, end in spans:
            if start <= t <= end:
                yield replace(frame, gps_linked=True)
                break
            if t < start:
                break
