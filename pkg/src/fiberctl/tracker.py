"""Red laser-dot localisation in RGB camera frames.

The aiming beam saturates the red channel well above tissue background, so a
simple chromatic threshold plus largest-component selection is enough; the
centroid is intensity-weighted for subpixel output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

RED_MIN = 128
RED_MARGIN = 50


@dataclass(frozen=True)
class DotFix:
    """Subpixel dot position in pixel coordinates (x right, y down)."""

    x: float
    y: float
    pixels: int
    peak_red: int


def red_mask(frame: np.ndarray) -> np.ndarray:
    """Pixels that are bright in red and dominantly red over green/blue."""
    if frame.ndim != 3 or frame.shape[2] < 3:
        raise ValueError(f"expected an (H, W, 3) frame, got {frame.shape}")
    rgb = frame.astype(np.int16)
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    return (r >= RED_MIN) & (r - np.maximum(g, b) >= RED_MARGIN)


def track_red_dot(frame: np.ndarray) -> DotFix | None:
    """Locate the laser dot, or None when no qualifying pixels exist.

    With multiple red blobs (specular reflections, marker tape) the largest
    connected component wins; its red-intensity-weighted centroid is the fix.
    """
    mask = red_mask(frame)
    if not mask.any():
        return None
    labels, n = ndimage.label(mask)
    if n > 1:
        sizes = ndimage.sum_labels(mask, labels, index=np.arange(1, n + 1))
        keep = int(np.argmax(sizes)) + 1
    else:
        keep = 1
    component = labels == keep
    r = frame[:, :, 0].astype(float) * component
    total = float(r.sum())
    ys, xs = np.nonzero(component)
    w = r[ys, xs] / total
    return DotFix(x=float(np.dot(xs, w)), y=float(np.dot(ys, w)),
                  pixels=int(component.sum()),
                  peak_red=int(frame[:, :, 0][component].max()))
