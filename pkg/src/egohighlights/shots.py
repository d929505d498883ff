"""Appearance scoring over sliding windows and shot boundary assignment.

Each frame gets an appearance score: the mean pairwise similarity of the
scene descriptors inside a window centered on it.  The stream is cut
wherever that score drops below the threshold beta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

DEFAULT_WINDOW = 15
DEFAULT_BETA = 0.9


@dataclass
class ShotAssignment:
    shot_ids: list[int]
    gammas: list[float]
    window: int
    beta: float

    @property
    def shot_count(self) -> int:
        # ids allocated, counting the initial shot even if every frame breached
        return (max(self.shot_ids) + 1) if self.shot_ids else 0


def window_bounds(i: int, n: int, window: int) -> tuple[int, int]:
    """Half-open index range of the window centered at i, truncated at ends."""
    lo = max(0, i - window // 2)
    hi = min(n, i + math.ceil(window / 2))
    return lo, hi


def appearance_score(window_vectors: np.ndarray) -> float:
    """Mean clamped pairwise dot product over all descriptor pairs in a window.

    A window with fewer than two frames is self-consistent by definition (1.0).
    """
    m = window_vectors.shape[0]
    if m < 2:
        return 1.0
    sims = window_vectors @ window_vectors.T
    pair = np.maximum(0.0, sims[np.triu_indices(m, k=1)])
    return min(1.0, float(pair.sum() / pair.size))


def appearance_scores(descriptors: Sequence, window: int = DEFAULT_WINDOW) -> list[float]:
    """Appearance score per frame from a sequence of GistDescriptors."""
    if window < 2:
        raise ValueError("window must be >= 2")
    mat = np.stack([d.values for d in descriptors])
    n = mat.shape[0]
    out = []
    for i in range(n):
        lo, hi = window_bounds(i, n, window)
        out.append(appearance_score(mat[lo:hi]))
    return out


def assign_shots(
    gammas: Sequence[float],
    beta: float = DEFAULT_BETA,
    min_shot_len: int = 1,
    window: int = DEFAULT_WINDOW,
) -> ShotAssignment:
    """Assign shot ids, incrementing whenever the score falls below beta.

    The breaching frame joins the new shot.  min_shot_len=1 applies the rule
    literally (every breach opens a shot); a larger value debounces boundary
    chatter by requiring the current shot to span at least that many frames
    before a new one may open.
    """
    ids: list[int] = []
    current = 0
    start = 0
    for i, g in enumerate(gammas):
        if g < beta and (min_shot_len <= 1 or i - start >= min_shot_len):
            current += 1
            start = i
        ids.append(current)
    return ShotAssignment(shot_ids=ids, gammas=list(gammas), window=window, beta=beta)
