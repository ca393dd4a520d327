"""Graph-based visual saliency.

A fully connected Markov chain is built over the locations of a coarse
feature map: the edge weight between locations i and j is the feature
dissimilarity |f(i) - f(j)| attenuated by a spatial Gaussian falloff. The
chain's equilibrium (stationary) distribution assigns high mass to
locations that differ strongly from their surroundings, which is read as
saliency. Channels are intensity plus oriented-gradient energy at four
orientations; their stationary maps are summed and max-normalized.
"""
from __future__ import annotations

from dataclasses import dataclass

import cv2
import numpy as np

from .imageio import to_gray
from .masks import nearest_resize


class ConvergenceError(RuntimeError):
    """Power iteration failed to reach tolerance; carries the residual."""

    def __init__(self, residual: float, iterations: int):
        super().__init__(
            f"stationary distribution not converged after {iterations} iterations "
            f"(L1 residual {residual:.3e})"
        )
        self.residual = residual
        self.iterations = iterations


@dataclass(frozen=True)
class GbvsConfig:
    working_resolution: int = 32  # longer side of the chain's map
    sigma_frac: float = 0.15  # Gaussian falloff sigma, fraction of map diagonal
    tolerance: float = 1e-9  # power iteration L1 tolerance
    max_iterations: int = 10000
    threshold: float = 0.11  # mask threshold on the max-normalized map

    def __post_init__(self):
        if self.sigma_frac <= 0:
            raise ValueError("sigma_frac must be > 0")
        if not 0 < self.threshold < 1:
            raise ValueError("threshold must be in (0, 1)")


@dataclass
class SaliencyMap:
    """Saliency over a working-resolution grid.

    ``values`` is max-normalized to [0, 1]; ``distribution`` is the combined
    stationary distribution before max-normalization and sums to 1. The
    source photo size is kept so masks can be lifted back to full resolution.
    """

    values: np.ndarray
    distribution: np.ndarray
    source_size: tuple[int, int]  # (width, height) of the input photo

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def _working_grid(img: np.ndarray, longer_side: int) -> np.ndarray:
    gray = to_gray(img)
    h, w = gray.shape
    scale = longer_side / max(w, h)
    if scale >= 1.0:
        return gray
    nw = max(int(round(w * scale)), 2)
    nh = max(int(round(h * scale)), 2)
    return cv2.resize(gray, (nw, nh), interpolation=cv2.INTER_AREA).astype(np.float64)


def feature_channels(grid: np.ndarray) -> list[np.ndarray]:
    """Intensity plus directional gradient energy at 0/45/90/135 degrees."""
    gy, gx = np.gradient(grid)
    channels = [grid]
    for theta in (0.0, 45.0, 90.0, 135.0):
        t = np.deg2rad(theta)
        channels.append(np.abs(gx * np.cos(t) + gy * np.sin(t)))
    return channels


def chain_weights(channel: np.ndarray, sigma_frac: float) -> np.ndarray:
    """Symmetric edge weights |f(i) - f(j)| * gaussian(spatial distance)."""
    h, w = channel.shape
    f = channel.reshape(-1)
    n = f.size
    diag = float(np.hypot(w, h))
    sigma = sigma_frac * diag

    ys, xs = np.divmod(np.arange(n), w)
    dx = xs[:, None] - xs[None, :]
    dy = ys[:, None] - ys[None, :]
    falloff = np.exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma))
    return np.abs(f[:, None] - f[None, :]) * falloff


def transition_matrix(channel: np.ndarray, sigma_frac: float) -> np.ndarray | None:
    """Column-stochastic transition matrix of the dissimilarity chain.

    Entry [i, j] is the probability of moving from location j to i. Returns
    None for a constant channel, where the chain is undefined.
    """
    weights = chain_weights(channel, sigma_frac)
    colsums = weights.sum(axis=0)
    if not np.all(colsums > 0):
        return None
    return weights / colsums[None, :]


def stationary_distribution(
    t: np.ndarray,
    tolerance: float = 1e-9,
    max_iterations: int = 10000,
    init: np.ndarray | None = None,
) -> tuple[np.ndarray, int]:
    """Power iteration on a column-stochastic matrix; returns (pi, iterations)."""
    n = t.shape[0]
    x = np.full(n, 1.0 / n) if init is None else init / init.sum()
    residual = float("inf")
    for it in range(1, max_iterations + 1):
        y = t @ x
        s = y.sum()
        if s <= 0 or not np.isfinite(s):
            raise ConvergenceError(float("nan"), it)
        y /= s
        residual = float(np.abs(y - x).sum())
        x = y
        if residual < tolerance:
            return x, it
    raise ConvergenceError(residual, max_iterations)


def gbvs_saliency(photo: np.ndarray, cfg: GbvsConfig = GbvsConfig()) -> SaliencyMap:
    """Compute the saliency map of a photo at the working resolution."""
    h, w = photo.shape[:2]
    if h < 16 or w < 16:
        raise ValueError(f"photo too small for saliency ({w}x{h}, need >= 16x16)")
    grid = _working_grid(photo, cfg.working_resolution)
    gh, gw = grid.shape
    n = gh * gw

    combined = np.zeros(n)
    active = 0
    for channel in feature_channels(grid):
        weights = chain_weights(channel, cfg.sigma_frac)
        colsums = weights.sum(axis=0)
        if not np.all(colsums > 0):
            continue  # constant channel, chain undefined
        t = weights / colsums[None, :]
        # Weights are symmetric, so the normalized node degrees are already
        # the fixed point; starting there makes the iteration cheap while
        # keeping the convergence check honest.
        pi, _ = stationary_distribution(t, cfg.tolerance, cfg.max_iterations, init=colsums)
        combined += pi
        active += 1

    if active == 0:
        # Constant image: nothing is salient, return the uniform map.
        distribution = np.full(n, 1.0 / n)
    else:
        distribution = combined / combined.sum()

    dist_grid = distribution.reshape(gh, gw)
    values = dist_grid / dist_grid.max()
    return SaliencyMap(values=values, distribution=dist_grid, source_size=(w, h))


def threshold_saliency(smap: SaliencyMap, threshold: float = 0.11) -> np.ndarray:
    """Binarize a saliency map and lift it to full photo resolution."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must be in (0, 1)")
    small = smap.values > threshold
    w, h = smap.source_size
    return nearest_resize(small, w, h)


def largest_component(mask: np.ndarray) -> np.ndarray:
    """Optional post-filter keeping only the largest connected mask blob."""
    m = mask.astype(np.uint8)
    count, labels = cv2.connectedComponents(m, connectivity=8)
    if count <= 2:
        return mask.copy()
    sizes = np.bincount(labels.reshape(-1))
    sizes[0] = 0
    return labels == int(sizes.argmax())
