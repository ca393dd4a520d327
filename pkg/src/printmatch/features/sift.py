"""SIFT and dense-SIFT extraction.

Detection and raw description are delegated to OpenCV's scale-space
implementation (3 scales per octave, contrast threshold 0.03, edge ratio
10); descriptors are then renormalized to unit L2 so downstream distances
are scale-free, and keypoints are filtered by mask-center membership.
"""
from __future__ import annotations

import cv2
import numpy as np

from ..imageio import to_gray
from . import FeatureSet, filter_by_mask

CONTRAST_THRESHOLD = 0.03
EDGE_THRESHOLD = 10
SCALES_PER_OCTAVE = 3
MIN_IMAGE_SIDE = 8

DSIFT_STRIDE = 8
DSIFT_PATCH = 16


def _gray_u8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(to_gray(img)), 0, 255).astype(np.uint8)


def _make_sift() -> cv2.SIFT:
    return cv2.SIFT_create(
        nOctaveLayers=SCALES_PER_OCTAVE,
        contrastThreshold=CONTRAST_THRESHOLD,
        edgeThreshold=EDGE_THRESHOLD,
    )


def _renormalize(desc: np.ndarray) -> np.ndarray:
    if desc.size == 0:
        return desc.astype(np.float32)
    norms = np.linalg.norm(desc.astype(np.float64), axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    return (desc / norms).astype(np.float32)


def sift_extract(img: np.ndarray, mask: np.ndarray | None = None) -> FeatureSet:
    """Scale-space keypoints + 128-d descriptors, mask-filtered."""
    gray = _gray_u8(img)
    h, w = gray.shape
    if min(h, w) < MIN_IMAGE_SIDE:
        raise ValueError(f"image {w}x{h} below minimum {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}")
    kps, desc = _make_sift().detectAndCompute(gray, None)
    if not kps:
        return FeatureSet.empty("sift", 128)
    pts = np.array(
        [(k.pt[0], k.pt[1], k.size / 2.0, np.deg2rad(k.angle)) for k in kps],
        dtype=np.float32,
    )
    # Canonical keypoint order, independent of detector internals.
    order = np.lexsort((pts[:, 3], pts[:, 2], pts[:, 0], pts[:, 1]))
    fs = FeatureSet("sift", pts[order], _renormalize(desc[order]))
    return filter_by_mask(fs, mask)


def dsift_extract(
    img: np.ndarray,
    mask: np.ndarray | None = None,
    stride: int = DSIFT_STRIDE,
    patch: int = DSIFT_PATCH,
) -> FeatureSet:
    """SIFT descriptors on a dense grid at fixed scale (patch/2) and orientation 0."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    gray = _gray_u8(img)
    h, w = gray.shape
    if min(h, w) < MIN_IMAGE_SIDE:
        raise ValueError(f"image {w}x{h} below minimum {MIN_IMAGE_SIDE}x{MIN_IMAGE_SIDE}")
    if w < patch or h < patch:
        return FeatureSet.empty("dsift", 128)

    centers = [
        (x0 + patch / 2.0, y0 + patch / 2.0)
        for y0 in range(0, h - patch + 1, stride)
        for x0 in range(0, w - patch + 1, stride)
    ]
    pts = np.array([(cx, cy, patch / 2.0, 0.0) for cx, cy in centers], dtype=np.float32)
    if mask is not None:
        fs = filter_by_mask(FeatureSet("dsift", pts, np.zeros((len(pts), 128), np.float32)), mask)
        pts = fs.keypoints
    if len(pts) == 0:
        return FeatureSet.empty("dsift", 128)
    cv_kps = [
        cv2.KeyPoint(x=float(x), y=float(y), size=float(patch), angle=0.0)
        for x, y, _, _ in pts
    ]
    _, desc = _make_sift().compute(gray, cv_kps)
    return FeatureSet("dsift", pts, _renormalize(desc))
