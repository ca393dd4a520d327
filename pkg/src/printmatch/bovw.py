"""Visual vocabulary learning, histogram quantization, and candidate ranking.

The vocabulary is plain Lloyd's k-means with k-means++ seeding. Each
candidate design file is its own class: its quantized histogram defines a
Laplace-smoothed multinomial, and queries are ranked by log-likelihood
(local pathway) or by (weighted) Euclidean distance between global vectors
(global pathway).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .features import FeatureSet, GlobalDescriptor
from .model import Ranking, make_ranking

MAX_ITERATIONS = 100
REL_TOL = 1e-4
_ASSIGN_CHUNK = 8192


def nearest_centroids(x: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Index of the nearest centroid per row (ties to the lowest index).

    Returns (labels, squared distances). Distances are computed in float64
    chunks via the expansion |x - c|^2 = |x|^2 - 2 x.c + |c|^2.
    """
    x = np.asarray(x, dtype=np.float64)
    c = np.asarray(centroids, dtype=np.float64)
    if x.shape[1] != c.shape[1]:
        raise ValueError(f"descriptor dim {x.shape[1]} != centroid dim {c.shape[1]}")
    c_sq = (c * c).sum(axis=1)
    labels = np.empty(len(x), dtype=np.intp)
    dists = np.empty(len(x), dtype=np.float64)
    for start in range(0, len(x), _ASSIGN_CHUNK):
        xb = x[start : start + _ASSIGN_CHUNK]
        d = (xb * xb).sum(axis=1)[:, None] - 2.0 * (xb @ c.T) + c_sq[None, :]
        lab = d.argmin(axis=1)
        labels[start : start + len(xb)] = lab
        dists[start : start + len(xb)] = np.maximum(d[np.arange(len(xb)), lab], 0.0)
    return labels, dists


@dataclass
class Vocabulary:
    centroids: np.ndarray  # (n_clusters, dim) float64
    seed: int
    iterations: int
    inertia: float

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]


def _kmeans_pp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    centroids = np.empty((k, x.shape[1]), dtype=x.dtype)
    centroids[0] = x[rng.integers(0, n)]
    d2 = ((x - centroids[0]) ** 2).sum(axis=1, dtype=np.float64)
    for m in range(1, k):
        total = d2.sum()
        if total <= 0:
            raise ValueError(f"fewer than {k} distinct descriptors (only {m} found)")
        idx = rng.choice(n, p=d2 / total)
        centroids[m] = x[idx]
        d2 = np.minimum(d2, ((x - centroids[m]) ** 2).sum(axis=1, dtype=np.float64))
    return centroids


def _assign_fast(x: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Training-loop assignment in float32 (BLAS-friendly)."""
    c_sq = (centroids.astype(np.float64) ** 2).sum(axis=1).astype(np.float32)
    labels = np.empty(len(x), dtype=np.intp)
    dists = np.empty(len(x), dtype=np.float64)
    for start in range(0, len(x), _ASSIGN_CHUNK):
        xb = x[start : start + _ASSIGN_CHUNK]
        d = c_sq[None, :] - 2.0 * (xb @ centroids.T)
        lab = d.argmin(axis=1)
        labels[start : start + len(xb)] = lab
        base = (xb.astype(np.float64) ** 2).sum(axis=1)
        dists[start : start + len(xb)] = np.maximum(
            base + d[np.arange(len(xb)), lab].astype(np.float64), 0.0)
    return labels, dists


def _update_centroids(x: np.ndarray, labels: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Mean per cluster via a stable sort + reduceat; empty clusters untouched."""
    order = np.argsort(labels, kind="stable")
    xs = x[order]
    sorted_labels = labels[order]
    starts = np.concatenate([[0], np.flatnonzero(np.diff(sorted_labels)) + 1])
    sums = np.add.reduceat(xs.astype(np.float64), starts, axis=0)
    present = sorted_labels[starts]
    counts = np.bincount(labels, minlength=len(centroids))
    out = centroids.copy()
    out[present] = (sums / counts[present, None]).astype(centroids.dtype)
    return out


def train_vocabulary(
    descriptors: np.ndarray,
    n_clusters: int,
    seed: int,
    max_iterations: int = MAX_ITERATIONS,
    rel_tol: float = REL_TOL,
) -> Vocabulary:
    """Lloyd's k-means with k-means++ seeding.

    Converges when the relative inertia improvement drops below ``rel_tol``
    or assignments stop changing; empty clusters are re-seeded to the point
    currently farthest from its own centroid.
    """
    x64 = np.asarray(descriptors, dtype=np.float64)
    if x64.ndim != 2 or len(x64) < n_clusters:
        raise ValueError(
            f"need >= {n_clusters} descriptors, got {len(x64) if x64.ndim == 2 else 'bad shape'}")
    if n_clusters < 2:
        raise ValueError("n_clusters must be >= 2")
    rng = np.random.default_rng(seed)
    x = x64.astype(np.float32)
    centroids = _kmeans_pp(x, n_clusters, rng)

    prev_inertia = np.inf
    prev_labels = None
    iterations = 0
    for iterations in range(1, max_iterations + 1):
        labels, d2 = _assign_fast(x, centroids)
        inertia = float(d2.sum())

        centroids = _update_centroids(x, labels, centroids)
        counts = np.bincount(labels, minlength=n_clusters)
        empty = np.flatnonzero(counts == 0)
        if len(empty):
            # Steal the points farthest from their assigned centroids.
            d2_pool = d2.copy()
            for cluster in empty:
                far = int(d2_pool.argmax())
                centroids[cluster] = x[far]
                d2_pool[far] = -1.0
        elif prev_labels is not None and np.array_equal(labels, prev_labels):
            break
        if prev_inertia - inertia < rel_tol * abs(prev_inertia) and np.isfinite(prev_inertia):
            break
        prev_inertia = inertia
        prev_labels = labels

    final_centroids = centroids.astype(np.float64)
    _, final_d2 = nearest_centroids(x64, final_centroids)
    return Vocabulary(
        centroids=final_centroids,
        seed=int(seed),
        iterations=iterations,
        inertia=float(final_d2.sum()),
    )


@dataclass
class BowHistogram:
    counts: np.ndarray  # (n_clusters,) int64

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __len__(self) -> int:
        return len(self.counts)


def quantize(fs: FeatureSet, vocab: Vocabulary) -> BowHistogram:
    """Count descriptors per nearest centroid."""
    if len(fs) == 0:
        return BowHistogram(np.zeros(vocab.n_clusters, dtype=np.int64))
    if fs.descriptors.shape[1] != vocab.dim:
        raise ValueError(
            f"descriptor dim {fs.descriptors.shape[1]} does not match vocabulary dim {vocab.dim}"
        )
    labels, _ = nearest_centroids(fs.descriptors, vocab.centroids)
    return BowHistogram(np.bincount(labels, minlength=vocab.n_clusters).astype(np.int64))


@dataclass
class MatcherIndex:
    """Immutable per-candidate representations for one design set."""

    pathway: str  # "local" | "global"
    design_ids: list[str]
    histograms: np.ndarray | None = None  # (n_designs, n_clusters) int64
    vectors: np.ndarray | None = None  # (n_designs, dim) float64
    weights: np.ndarray | None = None  # (dim,) applied as sum(w * (q - d)^2)
    alpha: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("smoothing alpha must be > 0")
        if self.pathway == "local":
            if self.histograms is None or len(self.histograms) != len(self.design_ids):
                raise ValueError("local index needs one histogram per design")
        elif self.pathway == "global":
            if self.vectors is None or len(self.vectors) != len(self.design_ids):
                raise ValueError("global index needs one vector per design")
        else:
            raise ValueError(f"unknown pathway {self.pathway!r}")


def build_local_index(design_ids: list[str], histograms: list[BowHistogram],
                      alpha: float = 1.0) -> MatcherIndex:
    return MatcherIndex(
        pathway="local",
        design_ids=list(design_ids),
        histograms=np.stack([h.counts for h in histograms]).astype(np.int64),
        alpha=alpha,
    )


def build_global_index(design_ids: list[str], vectors: list[GlobalDescriptor]) -> MatcherIndex:
    weights = vectors[0].weights
    for v in vectors:
        same = (v.weights is None) == (weights is None)
        if not same or (weights is not None and not np.array_equal(v.weights, weights)):
            raise ValueError("all design vectors must share the same weights")
    return MatcherIndex(
        pathway="global",
        design_ids=list(design_ids),
        vectors=np.stack([v.vector for v in vectors]).astype(np.float64),
        weights=None if weights is None else weights.astype(np.float64),
    )


def bayes_scores(query: BowHistogram, index: MatcherIndex) -> np.ndarray:
    """Per-design multinomial log-likelihood of the query counts.

    Class word distributions are (design counts + alpha) / (design total +
    alpha * n_clusters) with a uniform class prior, so the prior is a
    constant and omitted from the scores.
    """
    if index.pathway != "local":
        raise ValueError("naive-Bayes ranking requires a local-pathway index")
    hists = index.histograms.astype(np.float64)
    if len(query.counts) != hists.shape[1]:
        raise ValueError(
            f"query histogram length {len(query.counts)} does not match index {hists.shape[1]}"
        )
    n = hists.shape[1]
    log_theta = np.log(hists + index.alpha) - np.log(
        hists.sum(axis=1, keepdims=True) + index.alpha * n
    )
    return log_theta @ query.counts.astype(np.float64)


def rank_bayes(query: BowHistogram, index: MatcherIndex, photo_id: str = "",
               true_design_ids: set[str] | None = None) -> Ranking:
    scores = bayes_scores(query, index)
    return make_ranking(photo_id, index.design_ids, scores, true_design_ids)


def euclidean_scores(query: GlobalDescriptor, index: MatcherIndex) -> np.ndarray:
    """Negated (weighted) squared Euclidean distance, so larger is more similar."""
    if index.pathway != "global":
        raise ValueError("euclidean ranking requires a global-pathway index")
    q = np.asarray(query.vector, dtype=np.float64)
    if q.shape[0] != index.vectors.shape[1]:
        raise ValueError(
            f"query dim {q.shape[0]} does not match index dim {index.vectors.shape[1]}"
        )
    diff = index.vectors - q[None, :]
    if index.weights is not None:
        d2 = (index.weights[None, :] * diff * diff).sum(axis=1)
    else:
        d2 = (diff * diff).sum(axis=1)
    return -d2


def rank_euclidean(query: GlobalDescriptor, index: MatcherIndex, photo_id: str = "",
                   true_design_ids: set[str] | None = None) -> Ranking:
    scores = euclidean_scores(query, index)
    return make_ranking(photo_id, index.design_ids, scores, true_design_ids)


# --- on-disk formats -------------------------------------------------------

VOCAB_MAGIC = b"PMVC1"
INDEX_MAGIC = b"PMIX1"


def save_vocabulary(path: str | Path, vocab: Vocabulary) -> None:
    """PMVC1: magic, n_clusters u32, dim u32, seed i64, iterations u32,
    inertia f64, centroids float32."""
    with open(path, "wb") as f:
        f.write(VOCAB_MAGIC)
        f.write(struct.pack("<IIqId", vocab.n_clusters, vocab.dim, vocab.seed,
                            vocab.iterations, vocab.inertia))
        f.write(np.ascontiguousarray(vocab.centroids, dtype="<f4").tobytes())


def load_vocabulary(path: str | Path) -> Vocabulary:
    data = Path(path).read_bytes()
    if not data.startswith(VOCAB_MAGIC):
        raise ValueError(f"{path}: bad magic, not a vocabulary file")
    header = struct.calcsize("<IIqId")
    n, dim, seed, iterations, inertia = struct.unpack_from("<IIqId", data, len(VOCAB_MAGIC))
    body = np.frombuffer(data, dtype="<f4", offset=len(VOCAB_MAGIC) + header)
    if body.size != n * dim:
        raise ValueError(f"{path}: centroid payload truncated")
    return Vocabulary(
        centroids=body.reshape(n, dim).astype(np.float64),
        seed=seed, iterations=iterations, inertia=inertia,
    )


def save_index(path: str | Path, index: MatcherIndex) -> None:
    """PMIX1: magic, pathway u8 (0 local / 1 global), alpha f64, flags u8
    (bit0 weights), n u32, dim u32, ids, then rows (i64 counts or f64)."""
    is_global = index.pathway == "global"
    with open(path, "wb") as f:
        f.write(INDEX_MAGIC)
        has_weights = 1 if (is_global and index.weights is not None) else 0
        rows = index.vectors if is_global else index.histograms
        f.write(struct.pack("<BdBII", 1 if is_global else 0, index.alpha,
                            has_weights, len(index.design_ids), rows.shape[1]))
        for did in index.design_ids:
            b = did.encode("utf-8")
            f.write(struct.pack("<H", len(b)))
            f.write(b)
        dtype = "<f8" if is_global else "<i8"
        f.write(np.ascontiguousarray(rows, dtype=dtype).tobytes())
        if has_weights:
            f.write(np.ascontiguousarray(index.weights, dtype="<f8").tobytes())


def load_index(path: str | Path) -> MatcherIndex:
    data = Path(path).read_bytes()
    if not data.startswith(INDEX_MAGIC):
        raise ValueError(f"{path}: bad magic, not an index file")
    pos = len(INDEX_MAGIC)
    pathway_b, alpha, has_weights, n, dim = struct.unpack_from("<BdBII", data, pos)
    pos += struct.calcsize("<BdBII")
    ids = []
    for _ in range(n):
        (idlen,) = struct.unpack_from("<H", data, pos)
        pos += 2
        ids.append(data[pos : pos + idlen].decode("utf-8"))
        pos += idlen
    dtype = "<f8" if pathway_b else "<i8"
    rows = np.frombuffer(data, dtype=dtype, count=n * dim, offset=pos).reshape(n, dim).copy()
    pos += n * dim * 8
    weights = None
    if has_weights:
        weights = np.frombuffer(data, dtype="<f8", count=dim, offset=pos).copy()
    if pathway_b:
        return MatcherIndex(pathway="global", design_ids=ids, vectors=rows,
                            weights=weights, alpha=alpha)
    return MatcherIndex(pathway="local", design_ids=ids, histograms=rows, alpha=alpha)
