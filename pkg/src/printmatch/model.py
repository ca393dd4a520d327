"""Corpus data model: manifest schema, annotations, and rankings.

The on-disk corpus is indexed by a single ``manifest.json`` with top-level
keys ``products``, ``photos`` and ``designs``. All file paths inside the
manifest are relative to the manifest's directory.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ManifestError(ValueError):
    """Raised for unparseable or internally inconsistent manifests."""


@dataclass(frozen=True)
class AnnotationRecord:
    """Axis-aligned product rectangle on a photo, (x, y, w, h) in pixels."""

    photo_id: str
    rect: tuple[int, int, int, int]

    def validate(self, width: int, height: int) -> None:
        x, y, w, h = self.rect
        if w < 1 or h < 1 or x < 0 or y < 0 or x + w > width or y + h > height:
            raise ManifestError(
                f"photo {self.photo_id!r}: rect {self.rect} invalid for {width}x{height}"
            )


@dataclass
class ProductEntry:
    product_id: str
    design_ids: list[str]
    photo_ids: list[str]


@dataclass
class PhotoEntry:
    photo_id: str
    path: str
    rect: tuple[int, int, int, int] | None = None
    masks: dict[str, str] = field(default_factory=dict)  # method name -> mask file
    vectors: dict[str, str] = field(default_factory=dict)  # method name -> vector file


@dataclass
class DesignEntry:
    design_id: str
    path: str
    vectors: dict[str, str] = field(default_factory=dict)


@dataclass
class DatasetManifest:
    root: Path
    products: list[ProductEntry]
    photos: list[PhotoEntry]
    designs: list[DesignEntry]

    def photo(self, photo_id: str) -> PhotoEntry:
        try:
            return self._photo_index[photo_id]
        except AttributeError:
            self._photo_index = {p.photo_id: p for p in self.photos}
            return self._photo_index[photo_id]

    def design(self, design_id: str) -> DesignEntry:
        try:
            return self._design_index[design_id]
        except AttributeError:
            self._design_index = {d.design_id: d for d in self.designs}
            return self._design_index[design_id]

    def product_of_photo(self, photo_id: str) -> ProductEntry:
        try:
            return self._photo_product[photo_id]
        except AttributeError:
            self._photo_product = {
                pid: prod for prod in self.products for pid in prod.photo_ids
            }
            return self._photo_product[photo_id]

    def resolve(self, relpath: str) -> Path:
        return self.root / relpath

    def design_ids(self) -> list[str]:
        return [d.design_id for d in self.designs]

    def photo_ids(self) -> list[str]:
        return [p.photo_id for p in self.photos]


def _require(entry: dict, key: str, context: str):
    if key not in entry:
        raise ManifestError(f"{context}: missing field {key!r}")
    return entry[key]


def load_manifest(path: str | Path, check_files: bool = True) -> DatasetManifest:
    """Load and cross-validate a manifest.json.

    Validation: unique ids, all id references resolve, every photo's product
    has at least one design, rectangles fit their photos lazily (checked on
    use), and optionally that every referenced file exists.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ManifestError(f"{path}: parse error at line {e.lineno} col {e.colno}: {e.msg}") from e

    designs = []
    for entry in raw.get("designs", []):
        did = _require(entry, "design_id", "design entry")
        designs.append(
            DesignEntry(design_id=did, path=_require(entry, "path", f"design {did!r}"),
                        vectors=dict(entry.get("vectors", {})))
        )
    photos = []
    for entry in raw.get("photos", []):
        pid = _require(entry, "photo_id", "photo entry")
        rect = entry.get("rect")
        photos.append(
            PhotoEntry(
                photo_id=pid,
                path=_require(entry, "path", f"photo {pid!r}"),
                rect=tuple(int(v) for v in rect) if rect is not None else None,
                masks=dict(entry.get("masks", {})),
                vectors=dict(entry.get("vectors", {})),
            )
        )
    products = []
    for entry in raw.get("products", []):
        prid = _require(entry, "product_id", "product entry")
        products.append(
            ProductEntry(
                product_id=prid,
                design_ids=list(_require(entry, "design_ids", f"product {prid!r}")),
                photo_ids=list(entry.get("photo_ids", [])),
            )
        )

    manifest = DatasetManifest(root=path.parent, products=products, photos=photos, designs=designs)
    _validate(manifest, check_files=check_files)
    return manifest


def _validate(m: DatasetManifest, check_files: bool) -> None:
    design_ids = {d.design_id for d in m.designs}
    photo_ids = {p.photo_id for p in m.photos}
    if len(design_ids) != len(m.designs):
        raise ManifestError("duplicate design ids")
    if len(photo_ids) != len(m.photos):
        raise ManifestError("duplicate photo ids")
    product_ids = [p.product_id for p in m.products]
    if len(set(product_ids)) != len(product_ids):
        raise ManifestError("duplicate product ids")

    for prod in m.products:
        if not prod.design_ids:
            raise ManifestError(f"product {prod.product_id!r} has no designs")
        for did in prod.design_ids:
            if did not in design_ids:
                raise ManifestError(
                    f"product {prod.product_id!r}: dangling design reference {did!r}"
                )
        for pid in prod.photo_ids:
            if pid not in photo_ids:
                raise ManifestError(
                    f"product {prod.product_id!r}: dangling photo reference {pid!r}"
                )

    owned_photos = {pid for prod in m.products for pid in prod.photo_ids}
    for photo in m.photos:
        if photo.photo_id not in owned_photos:
            raise ManifestError(f"photo {photo.photo_id!r} not referenced by any product")

    if check_files:
        for d in m.designs:
            paths = [d.path, *d.vectors.values()]
            for rel in paths:
                if not (m.root / rel).exists():
                    raise ManifestError(f"design {d.design_id!r}: missing file {rel!r}")
        for p in m.photos:
            paths = [p.path, *p.masks.values(), *p.vectors.values()]
            for rel in paths:
                if not (m.root / rel).exists():
                    raise ManifestError(f"photo {p.photo_id!r}: missing file {rel!r}")


def save_manifest(m: DatasetManifest, path: str | Path) -> None:
    """Write the manifest as stable, diff-friendly JSON."""
    doc = {
        "products": [
            {"product_id": p.product_id, "design_ids": p.design_ids, "photo_ids": p.photo_ids}
            for p in m.products
        ],
        "photos": [
            {
                "photo_id": p.photo_id,
                "path": p.path,
                **({"rect": list(p.rect)} if p.rect is not None else {}),
                **({"masks": p.masks} if p.masks else {}),
                **({"vectors": p.vectors} if p.vectors else {}),
            }
            for p in m.photos
        ],
        "designs": [
            {
                "design_id": d.design_id,
                "path": d.path,
                **({"vectors": d.vectors} if d.vectors else {}),
            }
            for d in m.designs
        ],
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


@dataclass
class Ranking:
    """Sorted candidate list for one query photo.

    ``entries`` is a permutation of the candidate design set ordered by
    descending similarity (ties by ascending design id). ``order_of_match``
    is the 1-based rank of the query's product, computed pessimistically:
    a true design tied with others counts as ranked after every tied
    non-true design.
    """

    photo_id: str
    entries: list[tuple[str, float]]
    order_of_match: int | None


def make_ranking(
    photo_id: str,
    design_ids: list[str],
    scores: np.ndarray,
    true_design_ids: set[str] | None = None,
) -> Ranking:
    """Sort scores into a Ranking and derive the pessimistic order of match."""
    order = sorted(range(len(design_ids)), key=lambda i: (-scores[i], design_ids[i]))
    entries = [(design_ids[i], float(scores[i])) for i in order]

    order_of_match = None
    if true_design_ids:
        true_idx = [i for i, d in enumerate(design_ids) if d in true_design_ids]
        if true_idx:
            best = None
            for i in true_idx:
                s = scores[i]
                better = sum(1 for j in range(len(design_ids)) if scores[j] > s)
                tied_foreign = sum(
                    1
                    for j in range(len(design_ids))
                    if scores[j] == s and design_ids[j] not in true_design_ids
                )
                rank = 1 + better + tied_foreign
                best = rank if best is None else min(best, rank)
            order_of_match = best
    return Ranking(photo_id=photo_id, entries=entries, order_of_match=order_of_match)
