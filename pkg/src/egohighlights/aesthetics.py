"""Composition, symmetry and color vibrancy scoring for single frames.

Composition rewards large, strongly colored segments sitting near the best
of the four rule-of-thirds points, discounted by scene clutter.  Symmetry
measures how much of the frame is covered by mirror-consistent keypoint
pairs.  Vibrancy is a histogram measure over twelve weighted color bins,
corrected by how tightly each bin's pixels sit around its representative.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional

import cv2
import numpy as np

from .colors import luminance, srgb_to_lab
from .segmentation import SegmentMap, simplicity_weight

logger = logging.getLogger(__name__)

# keypoint work must not depend on the worker-pool layout of the host process
cv2.setNumThreads(1)

THIRDS_POINTS = (
    (1.0 / 3.0, 1.0 / 3.0),
    (2.0 / 3.0, 1.0 / 3.0),
    (1.0 / 3.0, 2.0 / 3.0),
    (2.0 / 3.0, 2.0 / 3.0),
)


@dataclass(frozen=True)
class ThirdsGeometry:
    d_epsilon: float = 0.05  # distance clamp; a centroid on the point must not blow up

    @property
    def points(self) -> tuple[tuple[float, float], ...]:
        return THIRDS_POINTS


@dataclass
class ColorBin:
    name: str
    lab: np.ndarray
    weight: float


@dataclass
class ColorBinTable:
    bins: list[ColorBin]

    def __post_init__(self):
        if len(self.bins) != 12:
            raise ValueError(f"color bin table must have exactly 12 bins, got {len(self.bins)}")

    @property
    def representatives(self) -> np.ndarray:
        return np.stack([b.lab for b in self.bins])

    @property
    def weights(self) -> np.ndarray:
        return np.array([b.weight for b in self.bins])

    @classmethod
    def from_json(cls, path: Path | str) -> "ColorBinTable":
        doc = json.loads(Path(path).read_text())
        return cls._from_doc(doc)

    @classmethod
    def _from_doc(cls, doc: dict) -> "ColorBinTable":
        bins = [
            ColorBin(name=b["name"], lab=np.asarray(b["lab"], dtype=np.float64),
                     weight=float(b["weight"]))
            for b in doc["bins"]
        ]
        return cls(bins=bins)


def default_bin_table() -> ColorBinTable:
    doc = json.loads(resources.files(__package__).joinpath("assets/colorbins.json").read_text())
    return ColorBinTable._from_doc(doc)


def color_weight(lab, table: ColorBinTable) -> tuple[int, float]:
    """Nearest bin for one LAB color; ties resolve to the lowest index."""
    lab = np.asarray(lab, dtype=np.float64)
    d = np.sqrt(np.sum((table.representatives - lab) ** 2, axis=1))
    idx = int(np.argmin(d))
    return idx, table.bins[idx].weight


def assign_bins(lab_pixels: np.ndarray, table: ColorBinTable) -> np.ndarray:
    """Vectorized nearest-bin index for an (N, 3) LAB array."""
    d2 = np.sum((lab_pixels[:, None, :] - table.representatives[None, :, :]) ** 2, axis=2)
    return np.argmin(d2, axis=1)


# --------------------------------------------------------------------------
# Composition
# --------------------------------------------------------------------------

def composition_details(
    segmap: SegmentMap,
    geom: ThirdsGeometry = ThirdsGeometry(),
    table: Optional[ColorBinTable] = None,
    simplicity_m0: int = 12,
) -> tuple[float, int, list[float]]:
    """Composition score plus the winning thirds point.

    Returns (score, best_point_index, per_point_scores).  Segment sizes enter
    as area fractions so the score does not depend on resolution.
    """
    if table is None:
        table = default_bin_table()
    m = segmap.segment_count
    if m < 1:
        raise ValueError("segment map has no segments")
    total = float(sum(s.size for s in segmap.segments))
    fracs = np.array([s.size / total for s in segmap.segments])
    weights = np.array([color_weight(s.mean_lab, table)[1] for s in segmap.segments])
    cx = np.array([s.centroid[0] for s in segmap.segments])
    cy = np.array([s.centroid[1] for s in segmap.segments])

    per_point = []
    for px, py in geom.points:
        d = np.maximum(geom.d_epsilon, np.sqrt((cx - px) ** 2 + (cy - py) ** 2))
        per_point.append(float(np.sum(fracs * weights / d) / m))
    best = int(np.argmax(per_point))
    score = simplicity_weight(m, simplicity_m0) * per_point[best]
    return score, best, per_point


def composition_score(
    segmap: SegmentMap,
    geom: ThirdsGeometry = ThirdsGeometry(),
    table: Optional[ColorBinTable] = None,
    simplicity_m0: int = 12,
) -> float:
    return composition_details(segmap, geom, table, simplicity_m0)[0]


# --------------------------------------------------------------------------
# Symmetry
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SymmetryConfig:
    k: int = 200                 # strongest keypoints retained per image
    match_ratio: float = 0.8     # Lowe ratio for accepting a mirror match
    position_tol: float = 0.05   # reflected-location slack, fraction of axis length
    min_pairs: int = 4
    axes: tuple[str, ...] = ("vertical", "horizontal")

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if not (0.0 < self.match_ratio < 1.0):
            raise ValueError("match_ratio must be in (0, 1)")


def _top_keypoints(gray: np.ndarray, k: int):
    sift = cv2.SIFT_create()
    kps, desc = sift.detectAndCompute(gray, None)
    if desc is None or len(kps) == 0:
        return np.empty((0, 2)), np.empty((0, 128))
    order = sorted(
        range(len(kps)),
        key=lambda i: (-kps[i].response, kps[i].pt[0], kps[i].pt[1], kps[i].size),
    )[:k]
    pts = np.array([kps[i].pt for i in order], dtype=np.float64)
    return pts, np.asarray(desc, dtype=np.float64)[order]


def _mutual_ratio_matches(d1: np.ndarray, d2: np.ndarray, ratio: float) -> list[tuple[int, int]]:
    """Mutual nearest neighbors that both pass the ratio test."""
    if len(d1) < 2 or len(d2) < 2:
        return []
    diff = d1[:, None, :] - d2[None, :, :]
    dist = np.sqrt(np.sum(diff * diff, axis=2))

    def best_two(m: np.ndarray):
        idx = np.argsort(m, axis=1, kind="stable")
        return idx[:, 0], m[np.arange(len(m)), idx[:, 0]], m[np.arange(len(m)), idx[:, 1]]

    fwd, fbest, fsecond = best_two(dist)
    bwd, bbest, bsecond = best_two(dist.T)
    out = []
    for i in range(len(d1)):
        j = int(fwd[i])
        if int(bwd[j]) != i:
            continue
        if fbest[i] >= ratio * fsecond[i] or bbest[j] >= ratio * bsecond[j]:
            continue
        out.append((i, j))
    return out


def _evaluate_axis(
    gray: np.ndarray,
    pts1: np.ndarray,
    d1: np.ndarray,
    axis: str,
    cfg: SymmetryConfig,
) -> tuple[int, list[tuple[float, float]]]:
    """Accepted mirror-pair count and their voted points for one axis."""
    h, w = gray.shape
    if axis == "vertical":
        mirrored = np.ascontiguousarray(gray[:, ::-1])
        span, other = w, h
    elif axis == "horizontal":
        mirrored = np.ascontiguousarray(gray[::-1, :])
        span, other = h, w
    else:
        raise ValueError(f"unknown axis: {axis}")
    pts2, d2 = _top_keypoints(mirrored, cfg.k)
    if len(pts2) == 0:
        return 0, []
    pairs = _mutual_ratio_matches(d1, d2, cfg.match_ratio)

    points: list[tuple[float, float]] = []
    n_ok = 0
    for i, j in pairs:
        p = pts1[i]
        q = pts2[j]
        # content symmetric about the center axis puts the mirrored match
        # at the same coordinates as the original keypoint
        if axis == "vertical":
            if abs(p[0] - q[0]) > cfg.position_tol * span or abs(p[1] - q[1]) > cfg.position_tol * other:
                continue
            q_orig = (w - 1.0 - q[0], q[1])
            refl_p = (w - 1.0 - p[0], p[1])
            refl_q = (q[0], q[1])
        else:
            if abs(p[1] - q[1]) > cfg.position_tol * span or abs(p[0] - q[0]) > cfg.position_tol * other:
                continue
            q_orig = (q[0], h - 1.0 - q[1])
            refl_p = (p[0], h - 1.0 - p[1])
            refl_q = (q[0], q[1])
        n_ok += 1
        points.extend([(p[0], p[1]), refl_p, q_orig, refl_q])
    return n_ok, points


def symmetry_details(
    raster: np.ndarray,
    cfg: SymmetryConfig = SymmetryConfig(),
) -> tuple[float, Optional[str], list[tuple[float, float]]]:
    """(score, winning axis, voted points) for the mirror-pair measure."""
    gray = np.ascontiguousarray(luminance(raster)).astype(np.uint8)
    h, w = gray.shape
    pts1, d1 = _top_keypoints(gray, cfg.k)
    if len(pts1) == 0:
        return 0.0, None, []

    best = 0.0
    best_axis: Optional[str] = None
    best_points: list[tuple[float, float]] = []
    for axis in cfg.axes:
        n_ok, points = _evaluate_axis(gray, pts1, d1, axis, cfg)
        if n_ok < cfg.min_pairs:
            continue
        xs = [pt[0] for pt in points]
        ys = [pt[1] for pt in points]
        area = min(1.0, (max(xs) - min(xs)) * (max(ys) - min(ys)) / (w * h))
        if area > best:
            best, best_axis, best_points = area, axis, points
    return best, best_axis, best_points


def symmetry_score(raster: np.ndarray, cfg: SymmetryConfig = SymmetryConfig()) -> float:
    """Fraction of the frame covered by mirror-consistent keypoint pairs.

    For each axis the frame is matched against its mirrored copy; accepted
    pairs (mutual nearest, ratio test, reflected position consistent) vote a
    bounding box, and the better axis wins.  Featureless frames score 0.
    """
    return symmetry_details(raster, cfg)[0]


def symmetry_overlay(raster: np.ndarray, cfg: SymmetryConfig = SymmetryConfig()) -> np.ndarray:
    """Copy of the frame with voted points and their bounding box drawn in."""
    score, axis, points = symmetry_details(raster, cfg)
    out = np.ascontiguousarray(raster.copy())
    if not points:
        return out
    xs = [int(round(p[0])) for p in points]
    ys = [int(round(p[1])) for p in points]
    cv2.rectangle(out, (min(xs), min(ys)), (max(xs), max(ys)), (255, 220, 0), 1)
    for x, y in zip(xs, ys):
        cv2.circle(out, (x, y), 2, (0, 255, 80), -1)
    mid_w, mid_h = out.shape[1] // 2, out.shape[0] // 2
    if axis == "vertical":
        cv2.line(out, (mid_w, 0), (mid_w, out.shape[0] - 1), (255, 60, 60), 1)
    elif axis == "horizontal":
        cv2.line(out, (0, mid_h), (out.shape[1] - 1, mid_h), (255, 60, 60), 1)
    return out


# --------------------------------------------------------------------------
# Vibrancy
# --------------------------------------------------------------------------

def vibrancy_score(
    raster: np.ndarray,
    table: Optional[ColorBinTable] = None,
    d_epsilon_bin: float = 1.0,
) -> float:
    """Weighted, density-corrected color histogram over the 12 bins.

    Each pixel joins its nearest bin; a bin contributes weight * fraction
    divided by the mean LAB distance of its pixels to the representative
    (clamped below at d_epsilon_bin).  Depends only on the color histogram,
    never on pixel positions.
    """
    if table is None:
        table = default_bin_table()
    lab = srgb_to_lab(raster).reshape(-1, 3)
    n = lab.shape[0]
    reps = table.representatives
    d2 = np.sum((lab[:, None, :] - reps[None, :, :]) ** 2, axis=2)
    idx = np.argmin(d2, axis=1)
    dist = np.sqrt(d2[np.arange(n), idx])

    # canonical per-bin summation order (bin, then distance) so the score is
    # exactly invariant under pixel permutation
    order = np.lexsort((dist, idx))
    idx_sorted = idx[order]
    dist_sorted = dist[order]
    counts = np.bincount(idx_sorted, minlength=12)
    boundaries = np.concatenate([[0], np.cumsum(counts)[:-1]])

    score = 0.0
    weights = table.weights
    for b in range(12):
        if counts[b] == 0:
            continue
        start = boundaries[b]
        mean_dist = dist_sorted[start:start + counts[b]].sum() / counts[b]
        score += weights[b] * (counts[b] / n) / max(d_epsilon_bin, mean_dist)
    return float(score)


# --------------------------------------------------------------------------
# Per-frame score record
# --------------------------------------------------------------------------

@dataclass
class FrameScores:
    gamma: float = 0.0
    comp: float = 0.0
    sym: float = 0.0
    vib: float = 0.0
    head: float = 0.0
    final: float = 0.0
    shot_id: int = 0

    def as_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "comp": self.comp,
            "sym": self.sym,
            "vib": self.vib,
            "head": self.head,
            "final": self.final,
        }
