"""PMFV1 descriptor cache files.

Layout (little-endian):
  magic   5 bytes  b"PMFV1"
  taglen  u8, then taglen ascii bytes (feature kind)
  flags   u8  bit0: keypoint rows present, bit1: weights row present
  count   u32 descriptor rows
  dim     u32 descriptor length
  [keypoints]   count x 4 float32 (x, y, scale, orientation)
  descriptors   count x dim float32
  [weights]     dim float32

Local feature sets carry keypoints; global vectors use count == 1 and may
carry a per-component weights row.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from . import FeatureSet, GlobalDescriptor

MAGIC = b"PMFV1"
_FLAG_KEYPOINTS = 1
_FLAG_WEIGHTS = 2


class CacheFormatError(ValueError):
    pass


def _write(path: Path, tag: str, flags: int, count: int, dim: int,
           keypoints: np.ndarray | None, rows: np.ndarray, weights: np.ndarray | None) -> None:
    tag_b = tag.encode("ascii")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<B", len(tag_b)))
        f.write(tag_b)
        f.write(struct.pack("<BII", flags, count, dim))
        if keypoints is not None:
            f.write(np.ascontiguousarray(keypoints, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(rows, dtype="<f4").tobytes())
        if weights is not None:
            f.write(np.ascontiguousarray(weights, dtype="<f4").tobytes())


def write_featureset(path: str | Path, fs: FeatureSet) -> None:
    dim = fs.descriptors.shape[1] if fs.descriptors.ndim == 2 else 0
    _write(Path(path), fs.kind, _FLAG_KEYPOINTS, len(fs), dim, fs.keypoints, fs.descriptors, None)


def write_global(path: str | Path, gd: GlobalDescriptor) -> None:
    flags = _FLAG_WEIGHTS if gd.weights is not None else 0
    _write(Path(path), gd.kind, flags, 1, len(gd.vector), None,
           gd.vector.reshape(1, -1), gd.weights)


def _read(path: Path):
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise CacheFormatError(f"{path}: bad magic, not a PMFV1 file")
    pos = len(MAGIC)
    (taglen,) = struct.unpack_from("<B", data, pos)
    pos += 1
    tag = data[pos : pos + taglen].decode("ascii")
    pos += taglen
    flags, count, dim = struct.unpack_from("<BII", data, pos)
    pos += struct.calcsize("<BII")

    def take(n_floats: int) -> np.ndarray:
        nonlocal pos
        nbytes = 4 * n_floats
        if pos + nbytes > len(data):
            raise CacheFormatError(f"{path}: truncated payload")
        arr = np.frombuffer(data[pos : pos + nbytes], dtype="<f4")
        pos += nbytes
        return arr

    keypoints = take(count * 4).reshape(count, 4).copy() if flags & _FLAG_KEYPOINTS else None
    rows = take(count * dim).reshape(count, dim).copy()
    weights = take(dim).copy() if flags & _FLAG_WEIGHTS else None
    return tag, keypoints, rows, weights


def read_featureset(path: str | Path) -> FeatureSet:
    tag, keypoints, rows, _ = _read(Path(path))
    if keypoints is None:
        raise CacheFormatError(f"{path}: no keypoint rows, not a local feature set")
    return FeatureSet(tag, keypoints, rows)


def load_global_vector(path: str | Path, expected_kind: str | None = None) -> GlobalDescriptor:
    """Load a global vector, validating finiteness and positive weights."""
    tag, keypoints, rows, weights = _read(Path(path))
    if keypoints is not None or rows.shape[0] != 1:
        raise CacheFormatError(f"{path}: not a single global vector")
    if expected_kind is not None and tag != expected_kind:
        raise CacheFormatError(f"{path}: kind {tag!r}, expected {expected_kind!r}")
    vector = rows[0]
    if not np.all(np.isfinite(vector)):
        raise CacheFormatError(f"{path}: non-finite vector component")
    if weights is not None:
        if not np.all(np.isfinite(weights)) or not np.all(weights > 0):
            raise CacheFormatError(f"{path}: weights must be finite and > 0")
    return GlobalDescriptor(kind=tag, vector=vector, weights=weights)
