"""Holistic scene descriptors from a Gabor filter bank.

The descriptor is the classic spatial-envelope recipe: grayscale, optional
local contrast normalization, a bank of oriented band-pass filters applied
in the frequency domain, and mean filter energy pooled over a coarse grid.
The L2-normalized vector makes frame-to-frame appearance a plain dot product.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import cv2
import numpy as np

from .colors import luminance


@dataclass(frozen=True)
class GistConfig:
    orientations: int = 8
    scales: int = 4
    grid: int = 4          # pooling grid per axis
    prefilter: bool = True
    size: int = 128        # internal working resolution (square)

    def __post_init__(self):
        if min(self.orientations, self.scales, self.grid) < 1:
            raise ValueError("orientations, scales and grid must all be >= 1")
        if self.size % self.grid != 0:
            raise ValueError("size must be divisible by grid")

    @property
    def dim(self) -> int:
        return self.orientations * self.scales * self.grid * self.grid


@dataclass
class GistDescriptor:
    values: np.ndarray  # unit L2 norm

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))


@lru_cache(maxsize=4)
def _filter_bank(size: int, orientations: int, scales: int) -> np.ndarray:
    """Frequency-domain transfer functions, shape (scales*orientations, size, size)."""
    n = size
    fx, fy = np.meshgrid(np.arange(-n / 2, n / 2), np.arange(-n / 2, n / 2))
    fr = np.fft.fftshift(np.sqrt(fx ** 2 + fy ** 2))
    ft = np.fft.fftshift(np.arctan2(fy, fx))

    bank = np.empty((scales * orientations, n, n))
    k = 0
    for s in range(scales):
        center_freq = 0.3 / (1.85 ** s)
        angle_gain = 16.0 * orientations ** 2 / 32.0 ** 2
        for o in range(orientations):
            theta0 = math.pi / orientations * o
            tr = ft + theta0
            tr += 2.0 * math.pi * (tr < -math.pi) - 2.0 * math.pi * (tr > math.pi)
            bank[k] = np.exp(
                -10.0 * 0.35 * (fr / n / center_freq - 1.0) ** 2
                - 2.0 * angle_gain * math.pi * tr ** 2
            )
            k += 1
    return bank


def _prefilt(img: np.ndarray, fc: float = 4.0) -> np.ndarray:
    """Whitening plus local contrast normalization (log-intensity domain)."""
    n = img.shape[0]
    img = np.log1p(img)
    s1 = fc / math.sqrt(math.log(2.0))
    fx, fy = np.meshgrid(np.arange(-n / 2, n / 2), np.arange(-n / 2, n / 2))
    gf = np.fft.fftshift(np.exp(-(fx ** 2 + fy ** 2) / (s1 ** 2)))
    lowpass = np.real(np.fft.ifft2(np.fft.fft2(img) * gf))
    out = img - lowpass
    local_var = np.real(np.fft.ifft2(np.fft.fft2(out ** 2) * gf))
    local_std = np.sqrt(np.abs(local_var))
    return out / (0.2 + local_std)


def _pool_grid(energy: np.ndarray, grid: int) -> np.ndarray:
    n = energy.shape[0]
    block = n // grid
    return energy.reshape(grid, block, grid, block).mean(axis=(1, 3))


def gist(raster: np.ndarray, cfg: GistConfig = GistConfig()) -> GistDescriptor:
    """Descriptor for one RGB (or grayscale) raster.

    A degenerate frame whose filter responses vanish gets the uniform unit
    vector so downstream dot products stay defined.
    """
    if raster.shape[0] < 32 or raster.shape[1] < 32:
        raise ValueError("frame must be at least 32x32")
    gray = luminance(raster)
    n = cfg.size
    interp = cv2.INTER_AREA if gray.shape[0] > n or gray.shape[1] > n else cv2.INTER_LINEAR
    gray = cv2.resize(gray, (n, n), interpolation=interp)
    if cfg.prefilter:
        gray = _prefilt(gray)

    bank = _filter_bank(cfg.size, cfg.orientations, cfg.scales)
    spectrum = np.fft.fft2(gray)
    values = np.empty(cfg.dim)
    cells = cfg.grid * cfg.grid
    for i in range(bank.shape[0]):
        energy = np.abs(np.fft.ifft2(spectrum * bank[i]))
        values[i * cells:(i + 1) * cells] = _pool_grid(energy, cfg.grid).ravel()

    norm = np.linalg.norm(values)
    if norm < 1e-12:
        values = np.full(cfg.dim, 1.0 / math.sqrt(cfg.dim))
    else:
        values = values / norm
    return GistDescriptor(values=values)


def gist_similarity(a: GistDescriptor, b: GistDescriptor) -> float:
    """Clamped dot product of two descriptors, in [0, 1]."""
    if a.values.shape != b.values.shape:
        raise ValueError(f"descriptor dimension mismatch: {a.values.shape} vs {b.values.shape}")
    return max(0.0, float(np.dot(a.values, b.values)))
