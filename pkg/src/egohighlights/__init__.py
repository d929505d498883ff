"""Picturesque highlight extraction from long first-person footage."""

from .aesthetics import (
    ColorBinTable,
    FrameScores,
    SymmetryConfig,
    ThirdsGeometry,
    color_weight,
    composition_score,
    default_bin_table,
    symmetry_score,
    vibrancy_score,
)
from .descriptors import GistConfig, GistDescriptor, gist, gist_similarity
from .geo import (
    GeoConfig,
    GeoNode,
    GpsPoint,
    PoiRecord,
    aggregate_nodes,
    haversine_km,
    importance_intervals,
    score_node,
)
from .head_tilt import TiltConfig, average_frame, head_score, ssim
from .ingest import CorpusManifest, FrameRecord, filter_by_intervals, load_corpus, load_manifest
from .pipeline import PipelineConfig, RunOptions, run_pipeline
from .ranking import (
    HighlightAlbum,
    RankConfig,
    baseline_chrono_uniform,
    baseline_geo_uniform,
    export_album,
    final_score,
    select_highlights,
)
from .segmentation import SegmentationConfig, SegmentMap, segment, simplicity_weight
from .shots import ShotAssignment, appearance_score, appearance_scores, assign_shots

__version__ = "0.1.0"
