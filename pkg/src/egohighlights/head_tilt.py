"""Head-levelness scoring: a frame against the mean of its time window.

Frames taken at the camera's resting pose match the window mean closely;
tilted frames diverge from it.  Similarity is block SSIM on luminance.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .colors import luminance
from .shots import window_bounds

SSIM_C1 = (0.01 * 255.0) ** 2
SSIM_C2 = (0.03 * 255.0) ** 2


@dataclass(frozen=True)
class TiltConfig:
    window: int = 31        # frames, about one second of head motion
    block: int = 8          # SSIM block edge, pixels

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.block < 1:
            raise ValueError("block must be >= 1")


def average_frame(rasters: Sequence[np.ndarray]) -> np.ndarray:
    """Per-pixel, per-channel mean of equally sized rasters, rounded half up."""
    if not rasters:
        raise ValueError("empty window")
    shape = rasters[0].shape
    for r in rasters[1:]:
        if r.shape != shape:
            raise ValueError("window frames must share dimensions")
    acc = np.zeros(shape, dtype=np.float64)
    for r in rasters:
        acc += r
    mean = acc / len(rasters)
    return np.clip(np.floor(mean + 0.5), 0, 255).astype(np.uint8)


def _blocks(lum: np.ndarray, block: int) -> np.ndarray:
    h, w = lum.shape
    nby, nbx = h // block, w // block
    cropped = lum[: nby * block, : nbx * block]
    return cropped.reshape(nby, block, nbx, block)


def ssim(a: np.ndarray, b: np.ndarray, cfg: TiltConfig = TiltConfig()) -> float:
    """Block SSIM over non-overlapping luminance blocks, mean across blocks.

    Partial edge blocks are dropped.  Result is in [-1, 1]; identical inputs
    give exactly 1.
    """
    la = luminance(a)
    lb = luminance(b)
    if la.shape != lb.shape:
        raise ValueError(f"shape mismatch: {la.shape} vs {lb.shape}")
    if la.shape[0] < cfg.block or la.shape[1] < cfg.block:
        raise ValueError(f"frame smaller than one {cfg.block}x{cfg.block} block")

    ba = _blocks(la, cfg.block)
    bb = _blocks(lb, cfg.block)
    mu_a = ba.mean(axis=(1, 3))
    mu_b = bb.mean(axis=(1, 3))
    var_a = (ba * ba).mean(axis=(1, 3)) - mu_a ** 2
    var_b = (bb * bb).mean(axis=(1, 3)) - mu_b ** 2
    cov = (ba * bb).mean(axis=(1, 3)) - mu_a * mu_b

    num = (2.0 * mu_a * mu_b + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_a ** 2 + mu_b ** 2 + SSIM_C1) * (var_a + var_b + SSIM_C2)
    return float(np.mean(num / den))


def head_score(
    index: int,
    rasters: Sequence[np.ndarray],
    cfg: TiltConfig = TiltConfig(),
) -> float:
    """SSIM of frame `index` against the mean frame of its window."""
    lo, hi = window_bounds(index, len(rasters), cfg.window)
    avg = average_frame(rasters[lo:hi])
    return ssim(rasters[index], avg, cfg)


def head_scores(rasters: Sequence[np.ndarray], cfg: TiltConfig = TiltConfig()) -> list[float]:
    """Head score for every frame, sliding the window sum for the means.

    Pixel sums stay exact (small integers in float64), so this matches the
    per-index computation bit for bit.
    """
    n = len(rasters)
    if n == 0:
        return []
    out: list[float] = []
    acc = np.zeros(rasters[0].shape, dtype=np.float64)
    cur = (0, 0)
    for i in range(n):
        lo, hi = window_bounds(i, n, cfg.window)
        while cur[1] < hi:
            acc += rasters[cur[1]]
            cur = (cur[0], cur[1] + 1)
        while cur[0] < lo:
            acc -= rasters[cur[0]]
            cur = (cur[0] + 1, cur[1])
        mean = acc / (hi - lo)
        avg = np.clip(np.floor(mean + 0.5), 0, 255).astype(np.uint8)
        out.append(ssim(rasters[i], avg, cfg))
    return out
