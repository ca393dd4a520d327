"""Global scene descriptor from oriented band-pass filter energies.

The image is resized to a 256x256 working frame and pushed through a bank
of 32 frequency-domain filters (4 radial scales x 8 orientations, zero DC
response). Mean filter energy over a 4x4 spatial grid gives 16 values per
filter, concatenated into a 512-d vector. Masked-out pixels are replaced
by the image's mean gray before filtering.
"""
from __future__ import annotations

import cv2
import numpy as np

from ..imageio import to_gray
from . import GlobalDescriptor

WORK_SIZE = 256
N_SCALES = 4
N_ORIENTATIONS = 8
GRID = 4

_BANK_CACHE: dict[int, np.ndarray] = {}


def _filter_bank(size: int) -> np.ndarray:
    """(n_filters, size, size) frequency-domain Gabor-style transfer functions."""
    if size in _BANK_CACHE:
        return _BANK_CACHE[size]
    fx = np.fft.fftfreq(size)
    fy = np.fft.fftfreq(size)
    gx, gy = np.meshgrid(fx, fy)
    r = np.hypot(gx, gy)
    theta = np.arctan2(gy, gx)

    filters = []
    sigma_theta = (np.pi / N_ORIENTATIONS) * 0.9
    for s in range(N_SCALES):
        f0 = 0.3 / (2.0**s)
        sigma_r = 0.55 * f0
        radial = np.exp(-((r - f0) ** 2) / (2 * sigma_r**2))
        for o in range(N_ORIENTATIONS):
            t0 = o * np.pi / N_ORIENTATIONS
            dt = np.angle(np.exp(1j * (theta - t0)))
            angular = np.exp(-(dt**2) / (2 * sigma_theta**2))
            g = radial * angular
            g[0, 0] = 0.0  # band-pass: constant images carry zero energy
            filters.append(g)
    bank = np.stack(filters)
    _BANK_CACHE[size] = bank
    return bank


def gist_extract(img: np.ndarray, mask: np.ndarray | None = None) -> GlobalDescriptor:
    gray = to_gray(img)
    if mask is not None:
        if mask.shape != gray.shape:
            raise ValueError(f"mask shape {mask.shape} does not match image {gray.shape}")
        gray = np.where(mask, gray, gray.mean())
    work = cv2.resize(gray, (WORK_SIZE, WORK_SIZE), interpolation=cv2.INTER_AREA)

    spectrum = np.fft.fft2(work)
    bank = _filter_bank(WORK_SIZE)
    block = WORK_SIZE // GRID
    out = np.empty(len(bank) * GRID * GRID, dtype=np.float64)
    for i, g in enumerate(bank):
        energy = np.abs(np.fft.ifft2(spectrum * g))
        pooled = energy.reshape(GRID, block, GRID, block).mean(axis=(1, 3))
        out[i * GRID * GRID : (i + 1) * GRID * GRID] = pooled.ravel()
    return GlobalDescriptor(kind="gist", vector=out.astype(np.float32))
