"""sRGB to CIE L*a*b* conversion shared by segmentation and color scoring.

Segment color binning compares LAB values produced here against table
entries produced the same way, so every caller must go through this module
rather than a third-party converter.
"""

from __future__ import annotations

import numpy as np

# D65 reference white, 2-degree observer
_WHITE = np.array([95.047, 100.0, 108.883])

_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)

_CBRT_CUTOFF = (6.0 / 29.0) ** 3
_LINEAR_SLOPE = 1.0 / (3.0 * (6.0 / 29.0) ** 2)


# linearization lookup for 8-bit inputs; identical to the float path below
_LINEAR_LUT = None


def _linear_lut() -> np.ndarray:
    global _LINEAR_LUT
    if _LINEAR_LUT is None:
        c = np.arange(256, dtype=np.float64) / 255.0
        _LINEAR_LUT = np.where(c > 0.04045, ((c + 0.055) / 1.055) ** 2.4, c / 12.92)
    return _LINEAR_LUT


def srgb_to_lab(rgb) -> np.ndarray:
    """Convert 8-bit sRGB values to L*a*b*.

    Accepts any array of shape (..., 3); returns float64 of the same shape.
    """
    arr = np.asarray(rgb)
    if arr.dtype == np.uint8:
        lin = _linear_lut()[arr]
    else:
        c = arr.astype(np.float64) / 255.0
        lin = np.where(c > 0.04045, ((c + 0.055) / 1.055) ** 2.4, c / 12.92)
    xyz = (lin @ _RGB_TO_XYZ.T) * 100.0
    t = xyz / _WHITE
    f = np.where(t > _CBRT_CUTOFF, np.cbrt(t), _LINEAR_SLOPE * t + 4.0 / 29.0)
    lab = np.empty_like(xyz)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def lab_distance(a, b) -> np.ndarray:
    """Euclidean distance in LAB (CIE76 delta E)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.sqrt(np.sum((a - b) ** 2, axis=-1))


def luminance(raster) -> np.ndarray:
    """ITU-R BT.601 luma of an RGB raster, float64 in [0, 255]."""
    r = np.asarray(raster, dtype=np.float64)
    if r.ndim == 2:
        return r
    return 0.299 * r[..., 0] + 0.587 * r[..., 1] + 0.114 * r[..., 2]
