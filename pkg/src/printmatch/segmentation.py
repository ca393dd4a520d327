"""Photo segmentation strategies: none, manual rectangle, saliency, external masks."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imageio import read_pgm
from .masks import rect_to_mask, upsample_binarize
from .model import DatasetManifest
from .saliency import GbvsConfig, gbvs_saliency, threshold_saliency

EXTERNAL_METHODS = ("vggreg", "fcn32s", "fcn8s")
SEGMENTATION_TAGS = ("none", "manual", "gbvs") + tuple(f"external:{n}" for n in EXTERNAL_METHODS)


@dataclass(frozen=True)
class SegmentationMethod:
    """One of: none, manual, gbvs, external(name)."""

    tag: str
    external_name: str | None = None

    @classmethod
    def parse(cls, s: str) -> "SegmentationMethod":
        if s in ("none", "manual", "gbvs"):
            return cls(tag=s)
        name = s.split(":", 1)[1] if s.startswith("external:") else s
        if name in EXTERNAL_METHODS:
            return cls(tag="external", external_name=name)
        raise ValueError(f"unknown segmentation method {s!r}")

    @property
    def label(self) -> str:
        return self.external_name if self.tag == "external" else self.tag


class SegmentationInputError(KeyError):
    """A photo is missing the annotation or mask file a method requires."""


def segment(
    photo: np.ndarray,
    method: SegmentationMethod,
    manifest: DatasetManifest | None = None,
    photo_id: str | None = None,
    gbvs_config: GbvsConfig = GbvsConfig(),
) -> np.ndarray:
    """Produce a full-resolution bool mask for a photo.

    ``manifest``/``photo_id`` supply the annotation rectangle (manual) or
    the external mask file (external); they are not needed for none/gbvs.
    """
    h, w = photo.shape[:2]
    if method.tag == "none":
        return np.ones((h, w), dtype=bool)
    if method.tag == "gbvs":
        smap = gbvs_saliency(photo, gbvs_config)
        return threshold_saliency(smap, gbvs_config.threshold)
    if manifest is None or photo_id is None:
        raise SegmentationInputError(f"method {method.label!r} requires manifest context")
    entry = manifest.photo(photo_id)
    if method.tag == "manual":
        if entry.rect is None:
            raise SegmentationInputError(f"photo {photo_id!r} has no annotation rectangle")
        return rect_to_mask(entry.rect, w, h)
    if method.tag == "external":
        rel = entry.masks.get(method.external_name)
        if rel is None:
            raise SegmentationInputError(
                f"photo {photo_id!r} has no {method.external_name!r} mask"
            )
        small = read_pgm(manifest.resolve(rel))
        return upsample_binarize(small, w, h)
    raise ValueError(f"unknown segmentation tag {method.tag!r}")
