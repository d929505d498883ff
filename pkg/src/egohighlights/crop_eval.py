"""Crop-improvement experiment on still photo datasets.

Each case is an original photo plus one or more crops of it.  A case counts
as improved on a metric when strictly more than half of its crops score
higher than the original.  Stills go through the same composition, symmetry
and vibrancy code as video frames, minus the temporal stages.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence

from .aesthetics import (
    ColorBinTable,
    SymmetryConfig,
    ThirdsGeometry,
    composition_score,
    default_bin_table,
    symmetry_score,
    vibrancy_score,
)
from .ingest import decode_frame
from .segmentation import SegmentationConfig, segment

logger = logging.getLogger(__name__)

METRICS = ("comp", "sym", "vib", "final")


@dataclass
class CropCase:
    original: Path
    crops: list[Path]
    dataset_id: str = ""

    def __post_init__(self):
        if not self.crops:
            raise ValueError(f"case {self.original}: needs at least one crop")


@dataclass
class StillScores:
    comp: float
    sym: float
    vib: float

    def final(self, lambda1: float, lambda2: float) -> float:
        return self.vib * (lambda1 * self.comp + lambda2 * self.sym)


@dataclass
class ImprovementReport:
    percentages: dict[str, float]   # metric -> 100 * improved / scored cases
    case_count: int                 # cases actually scored
    excluded: int                   # undecodable cases
    lambda1: float
    lambda2: float


Scorer = Callable[[Path], StillScores]


def pipeline_scorer(
    seg_cfg: SegmentationConfig = SegmentationConfig(),
    sym_cfg: SymmetryConfig = SymmetryConfig(),
    geom: ThirdsGeometry = ThirdsGeometry(),
    table: Optional[ColorBinTable] = None,
    analysis_max_side: int = 480,
) -> Scorer:
    """Scorer matching the video pipeline's single-frame treatment."""
    if table is None:
        table = default_bin_table()

    def score(path: Path) -> StillScores:
        raster = decode_frame(path, analysis_max_side)
        segmap = segment(raster, seg_cfg)
        comp = composition_score(segmap, geom, table, seg_cfg.simplicity_m0)
        sym = symmetry_score(raster, sym_cfg)
        vib = vibrancy_score(raster, table)
        return StillScores(comp=comp, sym=sym, vib=vib)

    return score


def load_crop_dataset(root: Path | str) -> list[CropCase]:
    """Directory per case: original.* plus crop_*.* files."""
    root = Path(root)
    cases = []
    for case_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        originals = sorted(case_dir.glob("original.*"))
        crops = sorted(case_dir.glob("crop_*.*"))
        if not originals or not crops:
            logger.warning("skipping %s: needs original.* and crop_*.*", case_dir)
            continue
        cases.append(CropCase(original=originals[0], crops=crops, dataset_id=case_dir.name))
    return cases


def _score_cases(
    cases: Sequence[CropCase],
    scorer: Scorer,
) -> tuple[list[tuple[StillScores, list[StillScores]]], int]:
    scored = []
    excluded = 0
    for case in cases:
        try:
            orig = scorer(case.original)
            crops = [scorer(p) for p in case.crops]
        except Exception as exc:
            logger.warning("excluding case %s: %s", case.dataset_id or case.original, exc)
            excluded += 1
            continue
        scored.append((orig, crops))
    return scored, excluded


def _report(
    scored: Sequence[tuple[StillScores, list[StillScores]]],
    excluded: int,
    lambda1: float,
    lambda2: float,
) -> ImprovementReport:
    improved = {m: 0 for m in METRICS}
    for orig, crops in scored:
        ref = {
            "comp": orig.comp,
            "sym": orig.sym,
            "vib": orig.vib,
            "final": orig.final(lambda1, lambda2),
        }
        for m in METRICS:
            if m == "final":
                ups = sum(1 for c in crops if c.final(lambda1, lambda2) > ref[m])
            else:
                ups = sum(1 for c in crops if getattr(c, m) > ref[m])
            # strict majority: an even split does not count
            if 2 * ups > len(crops):
                improved[m] += 1
    total = len(scored)
    pct = {m: (100.0 * improved[m] / total if total else 0.0) for m in METRICS}
    return ImprovementReport(percentages=pct, case_count=total, excluded=excluded,
                             lambda1=lambda1, lambda2=lambda2)


def crop_improvement(
    cases: Sequence[CropCase],
    lambda1: float = 0.8,
    lambda2: float = 0.2,
    scorer: Optional[Scorer] = None,
) -> ImprovementReport:
    scored, excluded = _score_cases(cases, scorer or pipeline_scorer())
    return _report(scored, excluded, lambda1, lambda2)


def lambda_sweep(
    cases: Sequence[CropCase],
    lambda1_grid: Optional[Sequence[float]] = None,
    scorer: Optional[Scorer] = None,
) -> list[ImprovementReport]:
    """Improvement reports across the composition-weight grid, lambda2 = 1 - lambda1.

    Component scores are computed once and reused; only the combination varies.
    """
    if lambda1_grid is None:
        lambda1_grid = [round(0.1 * i, 1) for i in range(11)]
    scored, excluded = _score_cases(cases, scorer or pipeline_scorer())
    return [_report(scored, excluded, l1, round(1.0 - l1, 10)) for l1 in lambda1_grid]


def sweep_to_csv(reports: Sequence[ImprovementReport], path: Path | str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["lambda1", "lambda2", "comp_pct", "sym_pct", "vib_pct",
                        "final_pct", "cases", "excluded"])
        for r in reports:
            writer.writerow([r.lambda1, r.lambda2, r.percentages["comp"],
                             r.percentages["sym"], r.percentages["vib"],
                             r.percentages["final"], r.case_count, r.excluded])
