import math

import numpy as np
import pytest

from egohighlights.aesthetics import (
    ColorBin,
    ColorBinTable,
    SymmetryConfig,
    ThirdsGeometry,
    color_weight,
    composition_details,
    composition_score,
    default_bin_table,
    symmetry_score,
    vibrancy_score,
)
from egohighlights.colors import srgb_to_lab
from egohighlights.segmentation import SegmentMap, SegmentStat

from conftest import mirrored_frame, scene_frame


@pytest.fixture(scope="module")
def table():
    return default_bin_table()


def single_segment_map(centroid, lab=(0.0, 0.0, 0.0), size=100):
    seg = SegmentStat(size=size, centroid=centroid, mean_lab=np.asarray(lab, dtype=float))
    return SegmentMap(labels=np.zeros((10, 10), dtype=np.int32), segments=[seg])


def table_with_weight_at_black(weight):
    """Custom table: black maps to the first bin with the given weight."""
    bins = [ColorBin("target", np.array([0.0, 0.0, 0.0]), weight)]
    bins += [ColorBin(f"far{i}", np.array([1000.0 + 10 * i, 0.0, 0.0]), 0.9) for i in range(11)]
    return ColorBinTable(bins=bins)


class TestColorWeight:
    def test_exact_representative(self, table):
        for i, b in enumerate(table.bins):
            idx, w = color_weight(b.lab, table)
            assert idx == i and w == b.weight

    def test_black_hits_lowest_weight_bin(self, table):
        idx, w = color_weight((0.0, 0.0, 0.0), table)
        assert table.bins[idx].name == "dark-neutral"
        assert w == min(b.weight for b in table.bins)

    def test_matches_bruteforce_scan(self, table):
        r = np.random.default_rng(0)
        reps = table.representatives
        for _ in range(1000):
            lab = np.array([r.uniform(0, 100), r.uniform(-100, 100), r.uniform(-100, 100)])
            idx, _ = color_weight(lab, table)
            dists = [float(np.linalg.norm(lab - rep)) for rep in reps]
            best = min(range(12), key=lambda i: (dists[i], i))
            assert idx == best

    def test_table_must_have_12_bins(self):
        with pytest.raises(ValueError):
            ColorBinTable(bins=[ColorBin("x", np.zeros(3), 1.0)])


class TestComposition:
    def test_segment_on_thirds_point(self):
        # single segment, weight 0.5, exactly on a thirds point: 0.5 / 0.05 = 10
        sm = single_segment_map((1 / 3, 1 / 3))
        t = table_with_weight_at_black(0.5)
        assert composition_score(sm, ThirdsGeometry(), t) == pytest.approx(10.0, abs=1e-12)

    def test_segment_at_center(self):
        # distance to any thirds point is sqrt(2)/6 ~ 0.2357
        sm = single_segment_map((0.5, 0.5))
        t = table_with_weight_at_black(0.5)
        expect = 0.5 / (math.sqrt(2.0) / 6.0)
        assert composition_score(sm, ThirdsGeometry(), t) == pytest.approx(expect, rel=1e-9)

    def test_best_point_is_max_over_four(self, table):
        r = np.random.default_rng(1)
        for _ in range(20):
            segs = [
                SegmentStat(size=int(r.integers(1, 50)),
                            centroid=(float(r.uniform(0, 1)), float(r.uniform(0, 1))),
                            mean_lab=np.array([r.uniform(0, 100), 0.0, 0.0]))
                for _ in range(int(r.integers(1, 8)))
            ]
            sm = SegmentMap(labels=np.zeros((4, 4), dtype=np.int32), segments=segs)
            score, best, per_point = composition_details(sm, ThirdsGeometry(), table)
            assert per_point[best] == max(per_point)
            assert score == pytest.approx(per_point[best] * 1.0)  # M <= 12 here

    def test_mirror_invariance_exact(self, table):
        r = np.random.default_rng(2)
        for _ in range(20):
            segs = [
                SegmentStat(size=10,
                            centroid=(float(r.uniform(0, 1)), float(r.uniform(0, 1))),
                            mean_lab=np.array([r.uniform(0, 100), 0.0, 0.0]))
                for _ in range(5)
            ]
            mirrored = [
              SegmentStat(size=s.size, centroid=(1.0 - s.centroid[0], s.centroid[1]),
                          mean_lab=s.mean_lab)
              for s in segs
            ]
            sm = SegmentMap(labels=np.zeros((4, 4), dtype=np.int32), segments=segs)
            sm_m = SegmentMap(labels=np.zeros((4, 4), dtype=np.int32), segments=mirrored)
            a = composition_score(sm, ThirdsGeometry(), table)
            b = composition_score(sm_m, ThirdsGeometry(), table)
            assert a == pytest.approx(b, abs=1e-12)

    def test_simplicity_scales_composition(self, table):
        segs = [
            SegmentStat(size=1, centroid=(0.5, 0.5), mean_lab=np.zeros(3))
            for _ in range(24)
        ]
        sm = SegmentMap(labels=np.zeros((4, 6), dtype=np.int32), segments=segs)
        full = composition_details(sm, ThirdsGeometry(), table)[2]
        assert composition_score(sm, ThirdsGeometry(), table) == pytest.approx(max(full) * 0.5)

    def test_thirds_maximum_over_translations(self, table):
        # a bright segment on dark background scores highest at a thirds
        # point and strictly beats the centered placement; the square is
        # tile-aligned so every placement segments into exactly 2 regions
        from egohighlights.segmentation import segment

        h, w, side = 96, 144, 16

        def frame_with_square(x0, y0):
            f = np.full((h, w, 3), 12, dtype=np.uint8)
            f[y0:y0 + side, x0:x0 + side] = (255, 30, 30)
            return f

        scores = {}
        for x0 in range(8, w - side, 8):
            for y0 in range(8, h - side, 8):
                sm = segment(frame_with_square(x0, y0))
                assert sm.segment_count == 2
                center = ((x0 + side / 2) / w, (y0 + side / 2) / h)
                scores[center] = composition_score(sm, ThirdsGeometry(), table)
        best = max(scores, key=lambda k: (scores[k], k))
        thirds = [(1 / 3, 1 / 3), (2 / 3, 1 / 3), (1 / 3, 2 / 3), (2 / 3, 2 / 3)]
        assert min(math.dist(best, t) for t in thirds) < 1e-9
        assert scores[best] > scores[(0.5, 0.5)]


class TestSymmetry:
    def test_blank_frame(self):
        assert symmetry_score(np.full((120, 160, 3), 99, dtype=np.uint8)) == 0.0

    def test_mirrored_fixture(self):
        assert symmetry_score(mirrored_frame()) >= 0.8

    def test_noise_rejected(self):
        vals = []
        for seed in range(20):
            noise = np.random.default_rng(seed).integers(0, 256, (240, 320, 3)).astype(np.uint8)
            vals.append(symmetry_score(noise))
        assert float(np.mean(vals)) <= 0.1

    def test_mirror_invariance(self):
        f = mirrored_frame(seed=5)
        assert abs(symmetry_score(f) - symmetry_score(f[:, ::-1])) < 1e-6

    def test_horizontal_axis_detected(self):
        f = mirrored_frame(seed=7)
        upright = np.ascontiguousarray(np.swapaxes(f, 0, 1))
        assert symmetry_score(upright) >= 0.8

    def test_asymmetric_scene_low(self):
        assert symmetry_score(scene_frame(2, 0, h=240, w=320)) <= 0.3

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SymmetryConfig(k=1)
        with pytest.raises(ValueError):
            SymmetryConfig(match_ratio=1.5)


class TestVibrancy:
    def test_uniform_at_representative(self, table):
        f = np.zeros((40, 40, 3), dtype=np.uint8)
        f[:] = (255, 0, 0)
        assert vibrancy_score(f, table) == pytest.approx(1.0)  # red weight / clamp 1.0

    def test_black_vs_vibrant(self, table):
        black = np.zeros((40, 40, 3), dtype=np.uint8)
        vivid = np.zeros((40, 40, 3), dtype=np.uint8)
        vivid[:20] = (255, 0, 0)
        vivid[20:] = (255, 255, 0)
        assert vibrancy_score(vivid, table) > vibrancy_score(black, table)

    def test_two_color_split_arithmetic(self):
        # 50/50 split exactly on representatives with weights 0.9 and 0.3
        lab_a = srgb_to_lab(np.array([255, 0, 0], dtype=np.uint8))
        lab_b = srgb_to_lab(np.array([0, 0, 255], dtype=np.uint8))
        bins = [ColorBin("a", lab_a, 0.9), ColorBin("b", lab_b, 0.3)]
        bins += [ColorBin(f"pad{i}", np.array([2000.0 + i, 0.0, 0.0]), 0.5) for i in range(10)]
        t = ColorBinTable(bins=bins)
        f = np.zeros((40, 40, 3), dtype=np.uint8)
        f[:20] = (255, 0, 0)
        f[20:] = (0, 0, 255)
        assert vibrancy_score(f, t) == pytest.approx(0.9 * 0.5 + 0.3 * 0.5, abs=1e-12)

    def test_pixel_permutation_invariance_exact(self, table):
        r = np.random.default_rng(3)
        f = r.integers(0, 256, (30, 40, 3)).astype(np.uint8)
        flat = f.reshape(-1, 3)
        perm = flat[r.permutation(len(flat))].reshape(f.shape)
        assert vibrancy_score(f, table) == vibrancy_score(perm, table)

    def test_dominant_bin_weight_monotonicity(self, table):
        f = np.zeros((30, 40, 3), dtype=np.uint8)
        f[:] = (250, 10, 10)  # lands in the red bin
        base = vibrancy_score(f, table)
        boosted_bins = [
            ColorBin(b.name, b.lab, min(1.0, b.weight + 0.2) if b.name == "red" else b.weight)
            for b in table.bins
        ]
        boosted = vibrancy_score(f, ColorBinTable(bins=boosted_bins))
        assert boosted >= base

    def test_empty_bins_contribute_zero(self, table):
        # single-color frame: only one bin occupied, score = that bin's term
        f = np.zeros((16, 16, 3), dtype=np.uint8)
        got = vibrancy_score(f, table)
        assert got == pytest.approx(0.1)  # dark-neutral weight, zero distance clamped


def test_shipped_table_is_declared_shape(table):
    names = [b.name for b in table.bins]
    assert len(names) == 12
    assert "skin" in names and "dark-neutral" in names
    weights = table.weights
    assert weights.min() == 0.1 and weights.max() == 1.0
