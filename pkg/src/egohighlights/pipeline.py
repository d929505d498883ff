"""End-to-end orchestration: stage execution, caching, and the score report.

Stage outputs are cached under content-derived keys (corpus hash + stage
config + upstream key), so reruns with unchanged inputs load instead of
recompute, and any input or config change invalidates exactly the stages
downstream of it.  Execution knobs (worker count, directories) stay outside
the semantic config so they never leak into report provenance.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import geo as geomod
from .aesthetics import (
    ColorBinTable,
    FrameScores,
    SymmetryConfig,
    ThirdsGeometry,
    default_bin_table,
    composition_score,
    symmetry_score,
    vibrancy_score,
)
from .descriptors import GistConfig, GistDescriptor, gist
from .head_tilt import TiltConfig, head_scores
from .ingest import CorpusManifest, FrameRecord, filter_by_intervals, load_corpus
from .ranking import HighlightAlbum, RankConfig, apply_final_scores, select_highlights
from .segmentation import SegmentationConfig, segment
from .shots import DEFAULT_BETA, DEFAULT_WINDOW, appearance_scores, assign_shots

logger = logging.getLogger(__name__)

REPORT_SCHEMA = "egohighlights-report/1"


class PipelineError(RuntimeError):
    """A stage failed; the message names the stage and the offending input."""


@dataclass
class ShotConfig:
    window: int = DEFAULT_WINDOW
    beta: float = DEFAULT_BETA
    min_shot_len: int = 1


@dataclass
class GeoStageConfig:
    d_max_km: float = 10.0
    d_min_km: float = 0.5
    walking_speed_ms: float = 1.4
    node_score_threshold: float = 0.0
    threshold_is_percentile: bool = False
    poi_radius_km: float = 2.0

    def to_geo_config(self) -> geomod.GeoConfig:
        return geomod.GeoConfig(
            d_max_km=self.d_max_km,
            d_min_km=self.d_min_km,
            walking_speed_ms=self.walking_speed_ms,
            node_score_threshold=self.node_score_threshold,
            threshold_is_percentile=self.threshold_is_percentile,
            poi_radius_km=self.poi_radius_km,
        )


@dataclass
class PipelineConfig:
    """Semantic configuration; hashed into every report."""

    analysis_max_side: int = 480
    geo: GeoStageConfig = field(default_factory=GeoStageConfig)
    gist: GistConfig = field(default_factory=GistConfig)
    shots: ShotConfig = field(default_factory=ShotConfig)
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    symmetry: SymmetryConfig = field(default_factory=SymmetryConfig)
    thirds_d_epsilon: float = 0.05
    colorbins_path: Optional[str] = None
    tilt: TiltConfig = field(default_factory=TiltConfig)
    rank: RankConfig = field(default_factory=RankConfig)


@dataclass
class RunOptions:
    """Execution knobs; never part of provenance."""

    cache_dir: Optional[Path] = None
    output_dir: Optional[Path] = None
    parallelism: int = 1
    poi_cache_dir: Optional[Path] = None
    use_cache: bool = True


@dataclass
class PipelineResult:
    report: dict
    album: HighlightAlbum
    frames: list[FrameRecord]
    scores: list[FrameScores]
    cache_events: dict[str, str] = field(default_factory=dict)


# --------------------------------------------------------------------------
# Config loading / hashing
# --------------------------------------------------------------------------

def _from_dict(cls, data: dict):
    if not isinstance(data, dict):
        raise ValueError(f"expected object for {cls.__name__}, got {type(data).__name__}")
    import typing

    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValueError(f"unknown config keys for {cls.__name__}: {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        ftype = hints.get(name)
        if dataclasses.is_dataclass(ftype):
            kwargs[name] = _from_dict(ftype, value)
        elif isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    return cls(**kwargs)


def load_pipeline_config(path: Path | str) -> PipelineConfig:
    doc = json.loads(Path(path).read_text())
    return _from_dict(PipelineConfig, doc)


def config_to_dict(cfg) -> dict:
    def convert(v):
        if dataclasses.is_dataclass(v):
            return {f.name: convert(getattr(v, f.name)) for f in dataclasses.fields(v)}
        if isinstance(v, (tuple, list)):
            return [convert(x) for x in v]
        if isinstance(v, Path):
            return str(v)
        return v

    return convert(cfg)


def config_hash(cfg: PipelineConfig) -> str:
    blob = json.dumps(config_to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _file_sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def corpus_hash(manifest: CorpusManifest) -> str:
    """Content hash over every frame file plus the manifest structure."""
    h = hashlib.sha256()
    for src in manifest.sources:
        h.update(f"{src.source_id}|{src.start}|{src.fps}".encode())
        if src.path.is_dir():
            for f in sorted(src.path.iterdir(), key=lambda p: p.name):
                if f.is_file():
                    h.update(f.name.encode())
                    h.update(_file_sha256(f).encode())
    if manifest.gps_track is not None and Path(manifest.gps_track).is_file():
        h.update(_file_sha256(Path(manifest.gps_track)).encode())
    return h.hexdigest()


# --------------------------------------------------------------------------
# Stage cache
# --------------------------------------------------------------------------

class StageCache:
    def __init__(self, cache_dir: Optional[Path], enabled: bool = True):
        self.cache_dir = cache_dir
        self.enabled = enabled and cache_dir is not None
        self.events: dict[str, str] = {}

    def key(self, *parts: str) -> str:
        h = hashlib.sha256()
        for p in parts:
            h.update(p.encode())
            h.update(b"\x00")
        return h.hexdigest()

    def arrays(self, stage: str, key: str, compute: Callable[[], dict[str, np.ndarray]]) -> dict[str, np.ndarray]:
        if not self.enabled:
            out = compute()
            self.events[stage] = "disabled"
            return out
        path = self.cache_dir / f"{stage}-{key[:32]}.npz"
        if path.exists():
            self.events[stage] = "hit"
            with np.load(path) as data:
                return {k: data[k] for k in data.files}
        out = compute()
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp.npz")
        np.savez(tmp, **out)
        tmp.replace(path)
        self.events[stage] = "miss"
        return out


def _parallel_map(fn, items: Sequence, workers: int) -> list:
    """Order-preserving map; results are identical for any worker count."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# Pipeline
# --------------------------------------------------------------------------

def geo_intervals(
    manifest: CorpusManifest,
    cfg: PipelineConfig,
    opts: RunOptions,
) -> tuple[Optional[list[tuple[float, float]]], Optional[str], Optional[list]]:
    if manifest.gps_track is None:
        return None, "no GPS track in manifest", None
    track = geomod.parse_track(manifest.gps_track)
    if not track:
        return None, "GPS track file empty", None
    gcfg = cfg.geo.to_geo_config()
    nodes = geomod.aggregate_nodes(track, gcfg)
    if opts.poi_cache_dir is not None:
        source = geomod.CachedPoiSource(opts.poi_cache_dir)
        geomod.score_nodes(nodes, source, gcfg.poi_radius_km)
        threshold = geomod.score_threshold(nodes, gcfg)
    else:
        # no POI data: every node keeps unknown score and passes the filter
        threshold = 0.0
    intervals = geomod.importance_intervals(nodes, threshold)
    return intervals, None, nodes


def run_pipeline(
    manifest: CorpusManifest,
    cfg: Optional[PipelineConfig] = None,
    opts: Optional[RunOptions] = None,
) -> PipelineResult:
    """Run every stage over the corpus and return the report plus the album."""
    cfg = cfg or PipelineConfig()
    opts = opts or RunOptions()
    cache = StageCache(opts.cache_dir, opts.use_cache)

    cfg_hash = config_hash(cfg)
    corp_hash = corpus_hash(manifest)

    table = (ColorBinTable.from_json(cfg.colorbins_path)
             if cfg.colorbins_path else default_bin_table())
    geom = ThirdsGeometry(d_epsilon=cfg.thirds_d_epsilon)

    # stage: geo filter
    try:
        intervals, geo_skip_reason, _nodes = geo_intervals(manifest, cfg, opts)
    except Exception as exc:
        raise PipelineError(f"geo stage failed: {exc}") from exc

    # stage: ingest
    decode_errors: list = []
    try:
        frames = load_corpus(manifest, cfg.analysis_max_side, decode_errors)
    except Exception as exc:
        raise PipelineError(f"ingest stage failed: {exc}") from exc
    if intervals is not None:
        frames = list(filter_by_intervals(frames, intervals))
        if not frames:
            raise PipelineError("geo filter removed every frame; lower the threshold")

    geo_key = cache.key("geo", corp_hash, json.dumps(config_to_dict(cfg.geo), sort_keys=True),
                        str(cfg.analysis_max_side))

    # windows never straddle source boundaries
    groups: list[tuple[int, int]] = []
    pos = 0
    for i, f in enumerate(frames):
        if i > 0 and f.source_id != frames[i - 1].source_id:
            groups.append((pos, i))
            pos = i
    groups.append((pos, len(frames)))

    # stage: scene descriptors
    def compute_descriptors() -> dict[str, np.ndarray]:
        vecs = _parallel_map(lambda f: gist(f.raster, cfg.gist).values, frames, opts.parallelism)
        return {"vectors": np.stack(vecs)}

    desc_key = cache.key(geo_key, "gist", json.dumps(config_to_dict(cfg.gist), sort_keys=True))
    try:
        desc = cache.arrays("descriptors", desc_key, compute_descriptors)["vectors"]
    except Exception as exc:
        raise PipelineError(f"descriptor stage failed: {exc}") from exc
    descriptors = [GistDescriptor(values=v) for v in desc]

    # stage: appearance + shots
    shots_key = cache.key(desc_key, "shots", json.dumps(config_to_dict(cfg.shots), sort_keys=True))

    def compute_shots() -> dict[str, np.ndarray]:
        gammas: list[float] = []
        shot_ids: list[int] = []
        offset = 0
        for lo, hi in groups:
            g = appearance_scores(descriptors[lo:hi], cfg.shots.window)
            assign = assign_shots(g, cfg.shots.beta, cfg.shots.min_shot_len, cfg.shots.window)
            gammas.extend(g)
            shot_ids.extend(offset + sid for sid in assign.shot_ids)
            offset = (max(shot_ids) + 1) if shot_ids else 0
        return {"gammas": np.array(gammas), "shot_ids": np.array(shot_ids, dtype=np.int64)}

    try:
        shot_arrays = cache.arrays("shots", shots_key, compute_shots)
    except Exception as exc:
        raise PipelineError(f"shot stage failed: {exc}") from exc
    gammas = shot_arrays["gammas"]
    shot_ids = shot_arrays["shot_ids"]

    # stage: segmentation + aesthetics
    aes_key = cache.key(
        geo_key, "aesthetics",
        json.dumps(config_to_dict(cfg.segmentation), sort_keys=True),
        json.dumps(config_to_dict(cfg.symmetry), sort_keys=True),
        str(cfg.thirds_d_epsilon),
        json.dumps([[b.name, list(b.lab), b.weight] for b in table.bins]),
    )

    def compute_aesthetics() -> dict[str, np.ndarray]:
        def one(f: FrameRecord):
            segmap = segment(f.raster, cfg.segmentation)
            comp = composition_score(segmap, geom, table, cfg.segmentation.simplicity_m0)
            sym = symmetry_score(f.raster, cfg.symmetry)
            vib = vibrancy_score(f.raster, table)
            return comp, sym, vib

        triples = _parallel_map(one, frames, opts.parallelism)
        arr = np.array(triples, dtype=np.float64).reshape(len(frames), 3)
        return {"comp": arr[:, 0], "sym": arr[:, 1], "vib": arr[:, 2]}

    try:
        aes = cache.arrays("aesthetics", aes_key, compute_aesthetics)
    except Exception as exc:
        raise PipelineError(f"aesthetics stage failed: {exc}") from exc

    # stage: head tilt
    head_key = cache.key(geo_key, "head", json.dumps(config_to_dict(cfg.tilt), sort_keys=True))

    def compute_head() -> dict[str, np.ndarray]:
        vals: list[float] = []
        for lo, hi in groups:
            vals.extend(head_scores([f.raster for f in frames[lo:hi]], cfg.tilt))
        return {"head": np.array(vals)}

    try:
        head = cache.arrays("head_tilt", head_key, compute_head)["head"]
    except Exception as exc:
        raise PipelineError(f"head tilt stage failed: {exc}") from exc

    # stage: ranking
    scores = [
        FrameScores(gamma=float(gammas[i]), comp=float(aes["comp"][i]),
                    sym=float(aes["sym"][i]), vib=float(aes["vib"][i]),
                    head=float(head[i]), shot_id=int(shot_ids[i]))
        for i in range(len(frames))
    ]
    apply_final_scores(scores, cfg.rank)
    album = select_highlights(scores, cfg.rank, frames, cfg_hash, corp_hash)

    report = {
        "schema": REPORT_SCHEMA,
        "provenance": {"config_hash": cfg_hash, "corpus_hash": corp_hash},
        "config": config_to_dict(cfg),
        "geo": {
            "enabled": intervals is not None,
            "skipped_reason": geo_skip_reason,
            "intervals": [list(iv) for iv in intervals] if intervals is not None else None,
        },
        "decode_errors": [
            {"source_id": s, "file": str(p), "error": e} for s, p, e in decode_errors
        ],
        "frames": [
            {
                "source_id": frames[i].source_id,
                "index": frames[i].index,
                "timestamp": frames[i].timestamp,
                "gps_linked": frames[i].gps_linked,
                "shot_id": scores[i].shot_id,
                "scores": scores[i].as_dict(),
            }
            for i in range(len(frames))
        ],
    }
    return PipelineResult(report=report, album=album, frames=frames,
                          scores=scores, cache_events=dict(cache.events))


def write_report(report: dict, path: Path | str) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
