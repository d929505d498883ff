"""Final scoring, highlight selection, baselines and album export.

The final score is vibrancy gating a weighted sum of composition and
symmetry.  Selection walks the ranking, swaps each candidate for the most
level frame in its shot that still scores close enough, and caps how many
entries one shot may contribute.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from PIL import Image

from .aesthetics import FrameScores
from .geo import GpsPoint
from .ingest import FrameRecord

logger = logging.getLogger(__name__)


@dataclass
class RankConfig:
    lambda1: float = 0.8
    lambda2: float = 0.2
    album_size: int = 100
    per_shot_cap: int = 1
    head_quality_floor: float = 0.1  # delta: substitute must keep final >= (1-delta)*candidate

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda weights must be >= 0")
        if self.album_size < 1:
            raise ValueError("album_size must be >= 1")
        if self.per_shot_cap < 1:
            raise ValueError("per_shot_cap must be >= 1")


@dataclass
class AlbumEntry:
    rank: int
    frame_pos: int            # position in the scored stream
    source_id: str
    frame_index: int
    timestamp: float
    shot_id: int
    scores: FrameScores
    path: Optional[Path] = None
    export_name: Optional[str] = None
    sha256: Optional[str] = None


@dataclass
class HighlightAlbum:
    entries: list[AlbumEntry] = field(default_factory=list)
    config_hash: str = ""
    corpus_hash: str = ""
    truncated: bool = False


def final_score(s: FrameScores, cfg: RankConfig) -> float:
    """Vibrancy-weighted sum of composition and symmetry."""
    return s.vib * (cfg.lambda1 * s.comp + cfg.lambda2 * s.sym)


def apply_final_scores(scores: Sequence[FrameScores], cfg: RankConfig) -> None:
    for s in scores:
        s.final = final_score(s, cfg)


def select_highlights(
    scores: Sequence[FrameScores],
    cfg: RankConfig,
    frames: Optional[Sequence[FrameRecord]] = None,
    config_hash: str = "",
    corpus_hash: str = "",
) -> HighlightAlbum:
    """Pick up to album_size frames by final score with head-tilt refinement.

    Candidates are visited in descending final score (ties to the earlier
    frame).  Each candidate is replaced by the unselected frame in its shot
    with the best head score among those whose final score stays within the
    quality floor.  A shot contributes at most per_shot_cap entries; running
    out of frames truncates the album with a warning.
    """
    n = len(scores)
    order = sorted(range(n), key=lambda i: (-scores[i].final, i))
    shot_members: dict[int, list[int]] = {}
    for i, s in enumerate(scores):
        shot_members.setdefault(s.shot_id, []).append(i)

    selected: list[int] = []
    used: set[int] = set()
    per_shot: dict[int, int] = {}
    for cand in order:
        if len(selected) >= cfg.album_size:
            break
        sid = scores[cand].shot_id
        if per_shot.get(sid, 0) >= cfg.per_shot_cap:
            continue
        floor = (1.0 - cfg.head_quality_floor) * scores[cand].final
        eligible = [j for j in shot_members[sid]
                    if j not in used and scores[j].final >= floor]
        if not eligible:
            continue
        pick = min(eligible, key=lambda j: (-scores[j].head, j))
        selected.append(pick)
        used.add(pick)
        per_shot[sid] = per_shot.get(sid, 0) + 1

    truncated = len(selected) < cfg.album_size
    if truncated:
        logger.warning("album truncated: %d of %d requested entries",
                       len(selected), cfg.album_size)

    entries = []
    for rank, pos in enumerate(selected, start=1):
        if frames is not None:
            f = frames[pos]
            entries.append(AlbumEntry(rank=rank, frame_pos=pos, source_id=f.source_id,
                                      frame_index=f.index, timestamp=f.timestamp,
                                      shot_id=scores[pos].shot_id, scores=scores[pos],
                                      path=f.path))
        else:
            entries.append(AlbumEntry(rank=rank, frame_pos=pos, source_id="",
                                      frame_index=pos, timestamp=float(pos),
                                      shot_id=scores[pos].shot_id, scores=scores[pos]))
    return HighlightAlbum(entries=entries, config_hash=config_hash,
                          corpus_hash=corpus_hash, truncated=truncated)


# --------------------------------------------------------------------------
# Evaluation baselines
# --------------------------------------------------------------------------

def _nearest_frame(frames: Sequence[FrameRecord], t: float) -> int:
    best = 0
    best_d = abs(frames[0].timestamp - t)
    for i in range(1, len(frames)):
        d = abs(frames[i].timestamp - t)
        if d < best_d:
            best, best_d = i, d
    return best


def baseline_geo_uniform(
    track: Sequence[GpsPoint],
    frames: Sequence[FrameRecord],
    x: int,
) -> list[FrameRecord]:
    """x frames nearest in time to x uniformly indexed track samples.

    Duplicate picks collapse to one (kept in first-hit order).
    """
    if not track:
        raise ValueError("no GPS track: use the chronologically uniform baseline instead")
    if not frames:
        raise ValueError("empty corpus")
    if x < 1:
        raise ValueError("x must be >= 1")
    n = len(track)
    picks: list[int] = []
    seen = set()
    for i in range(x):
        gi = min(n - 1, int((i + 0.5) * n / x))
        fi = _nearest_frame(frames, track[gi].timestamp)
        if fi not in seen:
            seen.add(fi)
            picks.append(fi)
    return [frames[i] for i in picks]


def baseline_chrono_uniform(
    frames: Sequence[FrameRecord],
    x: int,
    intervals: Optional[Sequence[tuple[float, float]]] = None,
) -> list[FrameRecord]:
    """x frames at equally spaced positions across the stream's duration.

    With intervals given (the GPS filter output), spacing runs over the
    concatenated interval durations; otherwise over the frames' full span.
    """
    if not frames:
        raise ValueError("empty filtered corpus")
    if x < 1:
        raise ValueError("x must be >= 1")
    if intervals:
        spans = [(s, e) for s, e in intervals]
    else:
        spans = [(frames[0].timestamp, frames[-1].timestamp)]
    total = sum(e - s for s, e in spans)
    picks = []
    for i in range(x):
        tau = (i + 0.5) / x * total
        t = spans[-1][1]
        for s, e in spans:
            if tau <= (e - s):
                t = s + tau
                break
            tau -= (e - s)
        picks.append(_nearest_frame(frames, t))
    return [frames[i] for i in picks]


# --------------------------------------------------------------------------
# Export
# --------------------------------------------------------------------------

def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def album_manifest(album: HighlightAlbum, config: Optional[dict] = None) -> dict:
    return {
        "config": config or {},
        "config_hash": album.config_hash,
        "corpus_hash": album.corpus_hash,
        "truncated": album.truncated,
        "entries": [
            {
                "rank": e.rank,
                "source_id": e.source_id,
                "frame_index": e.frame_index,
                "timestamp": e.timestamp,
                "shot_id": e.shot_id,
                "scores": e.scores.as_dict(),
                "file": e.export_name,
                "sha256": e.sha256,
            }
            for e in album.entries
        ],
    }


def export_album(
    album: HighlightAlbum,
    out_dir: Path | str,
    config: Optional[dict] = None,
) -> Path:
    """Write album images at original resolution plus album.json; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for e in album.entries:
        e.export_name = f"rank_{e.rank:03d}_{e.source_id}_{e.frame_index}.png"
        dest = out_dir / e.export_name
        if e.path is None:
            raise ValueError(f"album entry rank {e.rank} has no source file")
        with Image.open(e.path) as img:
            img.convert("RGB").save(dest, format="PNG")
        e.sha256 = _sha256(dest)
    manifest_path = out_dir / "album.json"
    with open(manifest_path, "w") as fh:
        json.dump(album_manifest(album, config), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path
