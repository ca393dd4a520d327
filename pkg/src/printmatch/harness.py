"""Benchmark protocol: sampled experiment sets, method matrix, top-k curves.

An experiment samples a fixed number of photos, gathers every design of
their products, and pads the candidate set with random non-pair fillers.
For each (photo, method) pair the 1-based rank of the photo's product in
the sorted candidates (the order of match) is recorded; top-k accuracy is
the fraction of photos with order <= k.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bovw
from .features import GLOBAL_FEATURES, LOCAL_FEATURES, FeatureSet, GlobalDescriptor, extract
from .imageio import load_png, read_pgm, write_pgm
from .masks import rect_to_mask
from .metrics import ncc
from .model import DatasetManifest
from .saliency import GbvsConfig
from .segmentation import SegmentationMethod, segment

DEFAULT_PHOTOS_PER_SET = 60
DEFAULT_DESIGNS_PER_SET = 100
DEFAULT_CLUSTERS = 2000
DEFAULT_ALPHA = 0.05  # likelihood smoothing; calibrated on the synthetic corpus


@dataclass(frozen=True)
class MethodSpec:
    """One cell of the benchmark matrix: feature x segmentation (x clusters)."""

    feature: str
    segmentation: SegmentationMethod
    clusters: int | None = None

    def __post_init__(self):
        if self.feature in GLOBAL_FEATURES and self.clusters is not None:
            object.__setattr__(self, "clusters", None)  # global pathway ignores N

    @property
    def pathway(self) -> str:
        return "local" if self.feature in LOCAL_FEATURES else "global"

    @property
    def name(self) -> str:
        return f"{self.feature}-{self.segmentation.label}"

    @classmethod
    def parse(cls, s: str, clusters: int | None = DEFAULT_CLUSTERS) -> "MethodSpec":
        feature, _, seg = s.partition("-")
        if not seg:
            raise ValueError(f"method {s!r} must look like 'sift-manual'")
        if feature not in LOCAL_FEATURES and feature not in GLOBAL_FEATURES:
            raise ValueError(f"unknown feature {feature!r}")
        return cls(feature=feature, segmentation=SegmentationMethod.parse(seg),
                   clusters=clusters if feature in LOCAL_FEATURES else None)


def default_method_list(clusters: int = DEFAULT_CLUSTERS) -> list[MethodSpec]:
    """The shipped 26-method matrix: 5 features x 6 segmentations, minus the
    deepspp cells for none/gbvs/fcn32s/fcn8s segmentation."""
    seg_names = ["none", "manual", "gbvs", "external:vggreg", "external:fcn32s", "external:fcn8s"]
    methods = []
    for feature in (*LOCAL_FEATURES, *GLOBAL_FEATURES):
        for seg in seg_names:
            if feature == "deepspp" and seg not in ("manual", "external:vggreg"):
                continue
            methods.append(MethodSpec(feature, SegmentationMethod.parse(seg), clusters))
    return methods


@dataclass(frozen=True)
class ExperimentSet:
    photo_ids: tuple[str, ...]
    design_ids: tuple[str, ...]
    seed: int

    def content_hash(self) -> str:
        payload = "|".join(self.photo_ids) + "#" + "|".join(self.design_ids)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def sample_experiment(
    manifest: DatasetManifest,
    n_photos: int = DEFAULT_PHOTOS_PER_SET,
    n_designs: int = DEFAULT_DESIGNS_PER_SET,
    seed: int = 0,
) -> ExperimentSet:
    """Uniform photo sample; their products' designs plus random fillers."""
    photos = manifest.photo_ids()
    if len(photos) < n_photos:
        raise ValueError(f"corpus has {len(photos)} photos, need {n_photos}")
    rng = np.random.default_rng(seed)
    chosen = [photos[i] for i in rng.choice(len(photos), size=n_photos, replace=False)]

    pairs: set[str] = set()
    for pid in chosen:
        pairs.update(manifest.product_of_photo(pid).design_ids)
    if len(pairs) > n_designs:
        raise ValueError(f"sampled photos own {len(pairs)} designs, more than {n_designs}")

    remaining = sorted(set(manifest.design_ids()) - pairs)
    n_fillers = n_designs - len(pairs)
    if len(remaining) < n_fillers:
        raise ValueError(f"corpus has only {len(remaining)} filler candidates, need {n_fillers}")
    fillers = [remaining[i] for i in rng.choice(len(remaining), size=n_fillers, replace=False)]
    return ExperimentSet(
        photo_ids=tuple(chosen),
        design_ids=tuple(sorted(pairs | set(fillers))),
        seed=int(seed),
    )


class FeatureStore:
    """Extraction/segmentation results keyed by image, memoized in memory
    and optionally on disk (PMFV1 / PGM files under ``cache_dir``)."""

    def __init__(self, manifest: DatasetManifest, cache_dir: str | Path | None = None,
                 gbvs_config: GbvsConfig = GbvsConfig()):
        self.manifest = manifest
        self.cache_dir = Path(cache_dir) if cache_dir else None
        self.gbvs_config = gbvs_config
        self.timings: dict[str, float] = {}
        self._features: dict[tuple, object] = {}
        self._masks: dict[tuple, np.ndarray] = {}
        self._images: dict[str, np.ndarray] = {}
        if self.cache_dir:
            (self.cache_dir / "features").mkdir(parents=True, exist_ok=True)
            (self.cache_dir / "masks").mkdir(parents=True, exist_ok=True)

    # -- images ------------------------------------------------------------
    def _photo_image(self, photo_id: str) -> np.ndarray:
        if photo_id not in self._images:
            self._images[photo_id] = load_png(
                self.manifest.resolve(self.manifest.photo(photo_id).path))
        return self._images[photo_id]

    def _design_image(self, design_id: str) -> np.ndarray:
        if design_id not in self._images:
            self._images[design_id] = load_png(
                self.manifest.resolve(self.manifest.design(design_id).path))
        return self._images[design_id]

    # -- masks ---------------------------------------------------------------
    def photo_mask(self, photo_id: str, seg: SegmentationMethod) -> np.ndarray | None:
        if seg.tag == "none":
            return None
        key = (photo_id, seg.label)
        if key in self._masks:
            return self._masks[key]
        pgm_path = None
        if self.cache_dir and seg.tag == "gbvs":
            pgm_path = self.cache_dir / "masks" / f"{photo_id}.gbvs.pgm"
            if pgm_path.exists():
                mask = read_pgm(pgm_path) > 127
                self._masks[key] = mask
                return mask
        t0 = time.perf_counter()
        mask = segment(self._photo_image(photo_id), seg, self.manifest, photo_id,
                       self.gbvs_config)
        self.timings["segmentation"] = self.timings.get("segmentation", 0.0) + (
            time.perf_counter() - t0)
        if pgm_path is not None:
            write_pgm(pgm_path, mask)
        self._masks[key] = mask
        return mask

    # -- features ------------------------------------------------------------
    def _cached_extract(self, image_id: str, img_loader, feature: str,
                        seg: SegmentationMethod | None, seg_label: str):
        key = (image_id, feature, seg_label)
        if key in self._features:
            return self._features[key]
        disk = None
        if self.cache_dir and feature != "deepspp":
            disk = self.cache_dir / "features" / f"{image_id}.{feature}.{seg_label}.pmfv"
            if disk.exists():
                from .features import cache as fcache
                result = (fcache.read_featureset(disk) if feature in LOCAL_FEATURES
                          else fcache.load_global_vector(disk))
                self._features[key] = result
                return result
        mask = None
        if seg is not None and seg.tag != "none":
            mask = self.photo_mask(image_id, seg)
        result = extract(img_loader(), feature, mask=mask, manifest=self.manifest,
                         image_id=image_id,
                         vector_key=f"deepspp:{seg_label}" if feature == "deepspp" else None,
                         timings=self.timings)
        if disk is not None:
            from .features import cache as fcache
            if isinstance(result, FeatureSet):
                fcache.write_featureset(disk, result)
            else:
                fcache.write_global(disk, result)
        self._features[key] = result
        return result

    def design_features(self, design_id: str, feature: str):
        """Design-side extraction; design rasters are clean, no segmentation."""
        return self._cached_extract(design_id, lambda: self._design_image(design_id),
                                    feature, None, "none")

    def photo_features(self, photo_id: str, feature: str, seg: SegmentationMethod):
        return self._cached_extract(photo_id, lambda: self._photo_image(photo_id),
                                    feature, seg, seg.label)

    # -- vocabularies ----------------------------------------------------------
    def vocabulary(self, design_ids: tuple[str, ...], feature: str, n_clusters: int,
                   seed: int) -> bovw.Vocabulary:
        key = ("vocab", feature, n_clusters, seed, tuple(sorted(design_ids)))
        if key in self._features:
            return self._features[key]
        pooled = [self.design_features(d, feature).descriptors for d in sorted(design_ids)]
        stacked = np.vstack([p for p in pooled if len(p)])
        t0 = time.perf_counter()
        vocab = bovw.train_vocabulary(stacked, n_clusters, seed)
        self.timings["vocabulary"] = self.timings.get("vocabulary", 0.0) + (
            time.perf_counter() - t0)
        self._features[key] = vocab
        return vocab

    def design_histogram(self, design_id: str, feature: str,
                         vocab: bovw.Vocabulary) -> bovw.BowHistogram:
        key = ("hist", design_id, feature, id(vocab))
        if key in self._features:
            return self._features[key]
        hist = bovw.quantize(self.design_features(design_id, feature), vocab)
        self._features[key] = hist
        return hist

    def photo_histogram(self, photo_id: str, feature: str, seg,
                        vocab: bovw.Vocabulary) -> bovw.BowHistogram:
        key = ("hist", photo_id, feature, seg.label, id(vocab))
        if key in self._features:
            return self._features[key]
        hist = bovw.quantize(self.photo_features(photo_id, feature, seg), vocab)
        self._features[key] = hist
        return hist


def run_experiment(
    exp: ExperimentSet,
    method: MethodSpec,
    store: FeatureStore,
    vocab_seed: int = 0,
    alpha: float = DEFAULT_ALPHA,
) -> list[int]:
    """Rank every photo of the set against its candidate designs; return orders."""
    manifest = store.manifest
    design_ids = list(exp.design_ids)

    if method.pathway == "local":
        if method.clusters is None:
            raise ValueError(f"method {method.name} needs a cluster count")
        vocab = store.vocabulary(exp.design_ids, method.feature, method.clusters, vocab_seed)
        hists = [store.design_histogram(d, method.feature, vocab) for d in design_ids]
        index = bovw.build_local_index(design_ids, hists, alpha=alpha)
    else:
        vectors = [store.design_features(d, method.feature) for d in design_ids]
        index = bovw.build_global_index(design_ids, vectors)

    orders: list[int] = []
    for photo_id in exp.photo_ids:
        true_ids = set(manifest.product_of_photo(photo_id).design_ids)
        if method.pathway == "local":
            query_hist = store.photo_histogram(photo_id, method.feature,
                                               method.segmentation, vocab)
        else:
            query_vec = store.photo_features(photo_id, method.feature, method.segmentation)
        t0 = time.perf_counter()
        if method.pathway == "local":
            ranking = bovw.rank_bayes(query_hist, index, photo_id, true_ids)
        else:
            ranking = bovw.rank_euclidean(query_vec, index, photo_id, true_ids)
        store.timings["matching"] = store.timings.get("matching", 0.0) + (
            time.perf_counter() - t0)
        if ranking.order_of_match is None:
            raise RuntimeError(f"photo {photo_id} has no candidate design in the set")
        orders.append(ranking.order_of_match)
    return orders


@dataclass
class TopKCurve:
    """accuracy[k-1] = fraction of orders <= k, for k = 1..n_designs."""

    accuracy: np.ndarray

    def at(self, k: int) -> float:
        return float(self.accuracy[k - 1])

    def __len__(self) -> int:
        return len(self.accuracy)


def topk_curve(orders: list[int] | np.ndarray, n_designs: int) -> TopKCurve:
    orders = np.asarray(orders)
    if orders.size == 0:
        raise ValueError("no orders to aggregate")
    ks = np.arange(1, n_designs + 1)
    acc = (orders[None, :] <= ks[:, None]).mean(axis=1)
    return TopKCurve(accuracy=acc)


def cluster_sweep(
    base: MethodSpec,
    cluster_counts: list[int],
    sets: list[ExperimentSet],
    store: FeatureStore,
    vocab_seed: int = 0,
) -> dict[int, TopKCurve]:
    """One curve per cluster count, with the same experiment sets reused
    across counts so comparisons are paired."""
    if base.pathway != "local":
        raise ValueError("cluster sweep applies to the local pathway only")
    results: dict[int, TopKCurve] = {}
    for n in sorted(set(cluster_counts)):
        method = MethodSpec(base.feature, base.segmentation, n)
        orders: list[int] = []
        for exp in sets:
            orders.extend(run_experiment(exp, method, store, vocab_seed=vocab_seed))
        results[n] = topk_curve(orders, len(sets[0].design_ids))
    return results


def seg_benchmark(
    seg: SegmentationMethod,
    manifest: DatasetManifest,
    store: FeatureStore | None = None,
    gt: str = "rect",
    photo_ids: list[str] | None = None,
) -> tuple[float, float]:
    """Mean and std of per-photo NCC between predicted and ground-truth masks.

    ``gt`` selects the reference: the annotation rectangle ("rect") or the
    stored tight mask file ("tight").
    """
    store = store or FeatureStore(manifest)
    photo_ids = photo_ids or manifest.photo_ids()
    scores = []
    for pid in photo_ids:
        entry = manifest.photo(pid)
        img = store._photo_image(pid)
        h, w = img.shape[:2]
        if gt == "rect":
            if entry.rect is None:
                raise ValueError(f"photo {pid} has no annotation rectangle")
            truth = rect_to_mask(entry.rect, w, h)
        elif gt == "tight":
            rel = entry.masks.get("gt")
            if rel is None:
                raise ValueError(f"photo {pid} has no ground-truth mask file")
            truth = read_pgm(manifest.resolve(rel)) > 127
        else:
            raise ValueError(f"unknown ground-truth source {gt!r}")
        predicted = store.photo_mask(pid, seg)
        if predicted is None:  # "none" predicts the full frame
            predicted = np.ones((h, w), dtype=bool)
        scores.append(ncc(predicted.astype(np.float64), truth.astype(np.float64)))
    arr = np.asarray(scores)
    return float(arr.mean()), float(arr.std())


def emit_report(results: dict[str, dict], out_dir: str | Path) -> None:
    """Write curves.csv, summary.json and per-method gnuplot .dat files.

    ``results`` maps method name -> {"curve": TopKCurve, "orders": list,
    "timings": dict}. Output is byte-stable for identical inputs.
    """
    if not results:
        raise ValueError("no results to report")
    out = Path(out_dir)
    (out / "curves").mkdir(parents=True, exist_ok=True)

    lines = ["method,k,accuracy"]
    for name in sorted(results):
        curve = results[name]["curve"]
        for k in range(1, len(curve) + 1):
            lines.append(f"{name},{k},{curve.at(k):.6f}")
    (out / "curves.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    summary = {}
    for name in sorted(results):
        r = results[name]
        orders = np.asarray(r["orders"])
        curve = r["curve"]
        summary[name] = {
            "n_queries": int(orders.size),
            "mean_order": round(float(orders.mean()), 6),
            "top1": round(curve.at(1), 6),
            "top5": round(curve.at(min(5, len(curve))), 6),
            "top10": round(curve.at(min(10, len(curve))), 6),
            "timings_s": {k: round(v, 6) for k, v in sorted(r.get("timings", {}).items())},
        }
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    for name in sorted(results):
        curve = results[name]["curve"]
        dat = "\n".join(f"{k} {curve.at(k):.6f}" for k in range(1, len(curve) + 1))
        (out / "curves" / f"{name}.dat").write_text(dat + "\n", encoding="utf-8")


def run_benchmark(
    manifest: DatasetManifest,
    methods: list[MethodSpec],
    n_experiments: int = 20,
    seed: int = 0,
    n_photos: int = DEFAULT_PHOTOS_PER_SET,
    n_designs: int = DEFAULT_DESIGNS_PER_SET,
    cache_dir: str | Path | None = None,
    out_dir: str | Path | None = None,
) -> dict[str, dict]:
    """Run the full matrix over freshly sampled experiment sets."""
    store = FeatureStore(manifest, cache_dir)
    sets = [
        sample_experiment(manifest, n_photos, n_designs,
                          seed=np.random.SeedSequence([seed, i]).generate_state(1)[0])
        for i in range(n_experiments)
    ]
    results: dict[str, dict] = {}
    for method in methods:
        t0 = time.perf_counter()
        store.timings = {}
        orders: list[int] = []
        for exp in sets:
            orders.extend(run_experiment(exp, method, store, vocab_seed=seed))
        timings = dict(store.timings)
        timings["total"] = time.perf_counter() - t0
        results[method.name] = {
            "curve": topk_curve(orders, n_designs),
            "orders": orders,
            "timings": timings,
        }
    if out_dir is not None:
        emit_report(results, out_dir)
    return results
