"""Binary mask construction and resampling helpers."""
from __future__ import annotations

import numpy as np


def rect_to_mask(rect: tuple[int, int, int, int], width: int, height: int) -> np.ndarray:
    """Rasterize an (x, y, w, h) rectangle into a bool mask of width x height."""
    x, y, w, h = (int(v) for v in rect)
    if w < 1 or h < 1:
        raise ValueError(f"rectangle sides must be >= 1, got w={w} h={h}")
    if x < 0 or y < 0 or x + w > width or y + h > height:
        raise ValueError(f"rectangle {rect} out of bounds for {width}x{height}")
    mask = np.zeros((height, width), dtype=bool)
    mask[y : y + h, x : x + w] = True
    return mask


def bilinear_resize(src: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resample to (out_h, out_w) using the half-pixel-center convention."""
    src = np.asarray(src, dtype=np.float64)
    if src.ndim != 2 or src.size == 0:
        raise ValueError("source must be a non-empty 2-d grid")
    h, w = src.shape
    if out_w < 1 or out_h < 1:
        raise ValueError("output dimensions must be >= 1")
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[None, :]
    fy = (ys - y0)[:, None]
    top = src[np.ix_(y0, x0)] * (1 - fx) + src[np.ix_(y0, x1)] * fx
    bot = src[np.ix_(y1, x0)] * (1 - fx) + src[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def upsample_binarize(mask_small: np.ndarray, target_w: int, target_h: int) -> np.ndarray:
    """Upsample a small grayscale mask (0-255) to target size, threshold at >= 128.

    This is how low-resolution externally produced masks (e.g. 30x30 PGM
    exports) are lifted to full photo resolution.
    """
    mask_small = np.asarray(mask_small)
    if mask_small.size == 0:
        raise ValueError("empty input mask")
    h, w = mask_small.shape
    if target_w < w or target_h < h:
        raise ValueError(f"target {target_w}x{target_h} smaller than source {w}x{h}")
    up = bilinear_resize(mask_small.astype(np.float64), target_w, target_h)
    return up >= 128.0


def nearest_resize(src: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Nearest-neighbor resample (used for lifting thresholded saliency masks)."""
    src = np.asarray(src)
    h, w = src.shape
    xi = np.minimum((((np.arange(out_w) + 0.5) * w) // out_w).astype(np.intp), w - 1)
    yi = np.minimum((((np.arange(out_h) + 0.5) * h) // out_h).astype(np.intp), h - 1)
    return src[np.ix_(yi, xi)]
