"""Feature extraction: local keypointed descriptors and global image vectors.

Local features (sift, dsift, hog) produce a FeatureSet whose keypoints all
satisfy the active mask rule; global features (gist, deepspp) produce one
fixed-length GlobalDescriptor per image. Additional extractors (e.g. a
surf implementation) can be plugged in through ``register_extractor``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..model import DatasetManifest

LOCAL_FEATURES = ("sift", "dsift", "hog")
GLOBAL_FEATURES = ("gist", "deepspp")


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    scale: float
    orientation: float  # radians


@dataclass
class FeatureSet:
    """Parallel keypoint/descriptor arrays for one image.

    ``keypoints`` is (n, 4) float32 with columns (x, y, scale, orientation);
    ``descriptors`` is (n, dim) float32.
    """

    kind: str
    keypoints: np.ndarray
    descriptors: np.ndarray

    def __post_init__(self):
        if len(self.keypoints) != len(self.descriptors):
            raise ValueError("keypoints and descriptors must be parallel")

    def __len__(self) -> int:
        return len(self.keypoints)

    def keypoint(self, i: int) -> Keypoint:
        x, y, s, o = self.keypoints[i]
        return Keypoint(float(x), float(y), float(s), float(o))

    @classmethod
    def empty(cls, kind: str, dim: int) -> "FeatureSet":
        return cls(kind, np.zeros((0, 4), np.float32), np.zeros((0, dim), np.float32))


@dataclass
class GlobalDescriptor:
    kind: str
    vector: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.weights is not None and len(self.weights) != len(self.vector):
            raise ValueError("weights must match vector length")


def filter_by_mask(fs: FeatureSet, mask: np.ndarray | None) -> FeatureSet:
    """Keep keypoints whose rounded center lies inside the mask."""
    if mask is None or len(fs) == 0:
        return fs
    h, w = mask.shape
    xi = np.clip(np.rint(fs.keypoints[:, 0]).astype(np.intp), 0, w - 1)
    yi = np.clip(np.rint(fs.keypoints[:, 1]).astype(np.intp), 0, h - 1)
    keep = mask[yi, xi]
    return FeatureSet(fs.kind, fs.keypoints[keep], fs.descriptors[keep])


_EXTRA_EXTRACTORS: dict[str, Callable] = {}


def register_extractor(tag: str, fn: Callable) -> None:
    """Plug in an extra extractor behind the FeatureSet contract."""
    _EXTRA_EXTRACTORS[tag] = fn


def extract(
    img: np.ndarray,
    kind: str,
    mask: np.ndarray | None = None,
    manifest: DatasetManifest | None = None,
    image_id: str | None = None,
    vector_key: str | None = None,
    timings: dict[str, float] | None = None,
):
    """Dispatch to the extractor for ``kind``; records wall time per kind.

    ``deepspp`` vectors are precomputed offline; they are resolved through
    the manifest entry of ``image_id`` (photos first, then designs).
    """
    from . import gist, hog, sift
    from .cache import load_global_vector

    t0 = time.perf_counter()
    if kind == "sift":
        result = sift.sift_extract(img, mask)
    elif kind == "dsift":
        result = sift.dsift_extract(img, mask)
    elif kind == "hog":
        result = hog.hog_extract(img, mask)
    elif kind == "gist":
        result = gist.gist_extract(img, mask)
    elif kind == "deepspp":
        if manifest is None or image_id is None:
            raise KeyError("deepspp requires manifest context and an image id")
        entry = None
        try:
            entry = manifest.photo(image_id)
        except KeyError:
            try:
                entry = manifest.design(image_id)
            except KeyError:
                raise KeyError(f"unknown image id {image_id!r}") from None
        key = vector_key or "deepspp"
        rel = entry.vectors.get(key) or entry.vectors.get("deepspp")
        if rel is None:
            raise KeyError(f"no precomputed deepspp vector for {image_id!r}")
        result = load_global_vector(manifest.resolve(rel), "deepspp")
    elif kind in _EXTRA_EXTRACTORS:
        result = _EXTRA_EXTRACTORS[kind](img, mask)
    else:
        raise ValueError(f"unknown feature kind {kind!r}")
    if timings is not None:
        timings[kind] = timings.get(kind, 0.0) + (time.perf_counter() - t0)
    return result
