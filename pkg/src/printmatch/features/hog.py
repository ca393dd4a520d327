"""Gradient-orientation histograms on a fixed 16x16 block grid.

Each non-overlapping 16x16 block holds four 8x8 cells with 9 unsigned
orientation bins each, L2-normalized per block into a 36-d descriptor.
A block survives mask filtering when at least half its pixels are masked in.
"""
from __future__ import annotations

import numpy as np

from ..imageio import to_gray
from . import FeatureSet

BLOCK = 16
CELL = 8
N_BINS = 9
_EPS = 1e-10


def hog_extract(img: np.ndarray, mask: np.ndarray | None = None) -> FeatureSet:
    gray = to_gray(img)
    h, w = gray.shape
    if h < BLOCK or w < BLOCK:
        raise ValueError(f"image {w}x{h} smaller than one {BLOCK}x{BLOCK} block")
    bh, bw = h // BLOCK, w // BLOCK
    ch, cw = 2 * bh, 2 * bw  # cell grid
    gray = gray[: bh * BLOCK, : bw * BLOCK]

    gy, gx = np.gradient(gray)
    mag = np.hypot(gx, gy)
    ang = np.degrees(np.arctan2(gy, gx)) % 180.0
    bins = np.minimum((ang / (180.0 / N_BINS)).astype(np.intp), N_BINS - 1)

    ys, xs = np.mgrid[0 : bh * BLOCK, 0 : bw * BLOCK]
    cell_idx = (ys // CELL) * cw + (xs // CELL)
    flat = cell_idx * N_BINS + bins
    hist = np.bincount(flat.ravel(), weights=mag.ravel(), minlength=ch * cw * N_BINS)
    hist = hist.reshape(ch, cw, N_BINS)

    keypoints = []
    descriptors = []
    for by in range(bh):
        for bx in range(bw):
            if mask is not None:
                block_mask = mask[by * BLOCK : (by + 1) * BLOCK, bx * BLOCK : (bx + 1) * BLOCK]
                if block_mask.sum() < 0.5 * BLOCK * BLOCK:
                    continue
            cells = [
                hist[2 * by, 2 * bx],
                hist[2 * by, 2 * bx + 1],
                hist[2 * by + 1, 2 * bx],
                hist[2 * by + 1, 2 * bx + 1],
            ]
            v = np.concatenate(cells)
            v = v / np.sqrt((v * v).sum() + _EPS * _EPS)
            keypoints.append((bx * BLOCK + (BLOCK - 1) / 2.0, by * BLOCK + (BLOCK - 1) / 2.0, 8.0, 0.0))
            descriptors.append(v)

    if not keypoints:
        return FeatureSet.empty("hog", 4 * N_BINS)
    return FeatureSet(
        "hog",
        np.asarray(keypoints, dtype=np.float32),
        np.asarray(descriptors, dtype=np.float32),
    )
