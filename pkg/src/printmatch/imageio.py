"""Image file IO: PNG via Pillow, binary PGM (P5) for mask interchange.

Images are numpy arrays: uint8, shape (h, w) for grayscale or (h, w, 3)
for RGB. Binary masks are bool arrays of shape (h, w).
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image


def load_png(path: str | Path) -> np.ndarray:
    """Decode a PNG into a uint8 array, (h, w) gray or (h, w, 3) RGB."""
    with Image.open(path) as im:
        if im.mode == "L":
            return np.asarray(im, dtype=np.uint8)
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def save_png(path: str | Path, img: np.ndarray) -> None:
    img = np.ascontiguousarray(img, dtype=np.uint8)
    if img.ndim == 2:
        Image.fromarray(img, mode="L").save(path, format="PNG")
    elif img.ndim == 3 and img.shape[2] == 3:
        Image.fromarray(img, mode="RGB").save(path, format="PNG")
    else:
        raise ValueError(f"expected (h, w) or (h, w, 3) uint8 image, got shape {img.shape}")


def to_gray(img: np.ndarray) -> np.ndarray:
    """RGB -> ITU-R 601 luma as float64 in [0, 255]; grayscale passes through."""
    if img.ndim == 2:
        return img.astype(np.float64)
    if img.ndim == 3 and img.shape[2] == 3:
        rgb = img.astype(np.float64)
        return rgb[..., 0] * 0.299 + rgb[..., 1] * 0.587 + rgb[..., 2] * 0.114
    raise ValueError(f"expected (h, w) or (h, w, 3) image, got shape {img.shape}")


def read_pgm(path: str | Path) -> np.ndarray:
    """Read a binary (P5, maxval <= 255) PGM into a uint8 (h, w) array."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (missing P5 magic)")
    # Header tokens (width, height, maxval) may be separated by whitespace
    # and '#' comment lines; the raster starts after a single whitespace
    # byte following maxval.
    pos = 2
    fields: list[int] = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated PGM header")
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace after maxval
    width, height, maxval = fields
    if not (1 <= maxval <= 255):
        raise ValueError(f"{path}: unsupported PGM maxval {maxval}")
    raster = data[pos : pos + width * height]
    if len(raster) != width * height:
        raise ValueError(f"{path}: PGM raster truncated ({len(raster)} of {width * height} bytes)")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width)


def write_pgm(path: str | Path, img: np.ndarray) -> None:
    """Write a uint8 (h, w) array (or bool mask, as 0/255) as binary PGM."""
    if img.dtype == bool:
        img = img.astype(np.uint8) * 255
    img = np.ascontiguousarray(img, dtype=np.uint8)
    if img.ndim != 2:
        raise ValueError(f"PGM requires a 2-d array, got shape {img.shape}")
    h, w = img.shape
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(img.tobytes())
