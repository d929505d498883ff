"""Per-frame superpixel segmentation by grid seeding and color merge.

The frame starts as a regular grid of small tiles; adjacent regions are then
merged greedily, closest mean LAB color first, until the closest remaining
pair is further apart than the coarseness threshold.  Merges only ever join
neighbors, so segments stay connected.

Segment count doubles as a scene-simplicity signal: frames that fall apart
into many segments at this coarseness are cluttered, and the simplicity
weight discounts them.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .colors import srgb_to_lab


@dataclass(frozen=True)
class SegmentationConfig:
    coarseness: float = 22.0    # LAB distance above which regions stay apart
    grid_px: int = 8            # initial tile edge, pixels
    simplicity_m0: int = 12     # segment count with no simplicity penalty

    def __post_init__(self):
        if self.coarseness <= 0:
            raise ValueError("coarseness must be > 0")
        if self.grid_px < 1:
            raise ValueError("grid_px must be >= 1")


@dataclass
class SegmentStat:
    size: int
    centroid: tuple[float, float]   # (x, y), normalized to [0, 1]
    mean_lab: np.ndarray


@dataclass
class SegmentMap:
    labels: np.ndarray              # HxW int32, dense 0..M-1
    segments: list[SegmentStat] = field(default_factory=list)

    @property
    def segment_count(self) -> int:
        return len(self.segments)


def _merge_regions(
    sums: np.ndarray,
    sizes: np.ndarray,
    edges: list[tuple[int, int]],
    coarseness: float,
) -> list[int]:
    """Greedy agglomerative merge; returns the root id per initial region."""
    n = len(sizes)
    parent = list(range(n))
    version = [0] * n
    size = [float(s) for s in sizes]
    mean_l = [float(sums[i, 0]) / size[i] for i in range(n)]
    mean_a = [float(sums[i, 1]) / size[i] for i in range(n)]
    mean_b = [float(sums[i, 2]) / size[i] for i in range(n)]
    sum_l = [float(v) for v in sums[:, 0]]
    sum_a = [float(v) for v in sums[:, 1]]
    sum_b = [float(v) for v in sums[:, 2]]
    neighbors: list[set[int]] = [set() for _ in range(n)]
    for u, v in edges:
        neighbors[u].add(v)
        neighbors[v].add(u)

    def find(x: int) -> int:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def dist(a: int, b: int) -> float:
        dl = mean_l[a] - mean_l[b]
        da = mean_a[a] - mean_a[b]
        db = mean_b[a] - mean_b[b]
        return math.sqrt(dl * dl + da * da + db * db)

    heap: list[tuple[float, int, int, int, int]] = [
        (dist(u, v), u, v, 0, 0) for u, v in edges
    ]
    heapq.heapify(heap)

    while heap:
        d, a, b, va, vb = heapq.heappop(heap)
        if parent[a] != a or parent[b] != b or version[a] != va or version[b] != vb:
            continue
        if d > coarseness:
            break
        a, b = min(a, b), max(a, b)
        parent[b] = a
        sum_l[a] += sum_l[b]
        sum_a[a] += sum_a[b]
        sum_b[a] += sum_b[b]
        size[a] += size[b]
        mean_l[a] = sum_l[a] / size[a]
        mean_a[a] = sum_a[a] / size[a]
        mean_b[a] = sum_b[a] / size[a]
        version[a] += 1
        merged_nb = (neighbors[a] | neighbors[b]) - {a, b}
        new_nb = set()
        for nb in merged_nb:
            r = find(nb)
            if r == a:
                continue
            new_nb.add(r)
            neighbors[r].discard(b)
            neighbors[r].add(a)
            lo, hi = (a, r) if a < r else (r, a)
            heapq.heappush(heap, (dist(lo, hi), lo, hi, version[lo], version[hi]))
        neighbors[a] = new_nb
        neighbors[b] = set()

    return [find(i) for i in range(n)]


def segment(raster: np.ndarray, cfg: SegmentationConfig = SegmentationConfig()) -> SegmentMap:
    """Segment an RGB raster into connected superpixels with LAB statistics."""
    lab = srgb_to_lab(raster)
    h, w = lab.shape[:2]
    bs = cfg.grid_px
    ny = -(-h // bs)
    nx = -(-w // bs)
    n = ny * nx

    row_tile = np.arange(h) // bs
    col_tile = np.arange(w) // bs
    tiles = (row_tile[:, None] * nx + col_tile[None, :]).astype(np.int32)
    flat_tiles = tiles.ravel()
    lab_flat = lab.reshape(-1, 3)
    sums = np.stack(
        [np.bincount(flat_tiles, weights=lab_flat[:, c], minlength=n) for c in range(3)],
        axis=1,
    )
    sizes = np.bincount(flat_tiles, minlength=n)

    edges: list[tuple[int, int]] = []
    for ty in range(ny):
        base = ty * nx
        for tx in range(nx):
            t = base + tx
            if tx + 1 < nx:
                edges.append((t, t + 1))
            if ty + 1 < ny:
                edges.append((t, t + nx))

    roots = np.asarray(_merge_regions(sums, sizes, edges, cfg.coarseness), dtype=np.int64)
    root_labels = roots[tiles]

    # dense relabel in scan order of first appearance
    flat = root_labels.ravel()
    _, first_idx = np.unique(flat, return_index=True)
    uniques = flat[np.sort(first_idx)]
    remap = np.full(n, -1, dtype=np.int32)
    remap[uniques] = np.arange(len(uniques), dtype=np.int32)
    final = remap[root_labels]

    m = len(uniques)
    counts = np.bincount(final.ravel(), minlength=m)
    ys, xs = np.mgrid[0:h, 0:w]
    cx = np.bincount(final.ravel(), weights=(xs.ravel() + 0.5), minlength=m) / counts / w
    cy = np.bincount(final.ravel(), weights=(ys.ravel() + 0.5), minlength=m) / counts / h
    chans = [
        np.bincount(final.ravel(), weights=lab_flat[:, c], minlength=m) / counts
        for c in range(3)
    ]
    stats = [
        SegmentStat(
            size=int(counts[j]),
            centroid=(float(cx[j]), float(cy[j])),
            mean_lab=np.array([chans[0][j], chans[1][j], chans[2][j]]),
        )
        for j in range(m)
    ]
    return SegmentMap(labels=final, segments=stats)


def write_label_png(segmap: SegmentMap, path) -> None:
    """Debug export: the label map as an indexed-palette PNG."""
    from PIL import Image

    img = Image.fromarray((segmap.labels % 256).astype(np.uint8), mode="P")
    rng = np.random.default_rng(0)
    palette = rng.integers(30, 255, (256, 3), dtype=np.uint8)
    palette[0] = (20, 20, 20)
    img.putpalette(palette.ravel().tolist())
    img.save(path)


def simplicity_weight(m: int, m0: int = 12) -> float:
    """Simplicity factor in (0, 1]: flat at 1 up to m0 segments, then m0/m."""
    if m < 1:
        raise ValueError("segment count must be >= 1")
    if m <= m0:
        return 1.0
    return m0 / m
