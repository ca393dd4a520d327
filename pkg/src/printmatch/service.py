"""Matching service: prebuilt index snapshots and the HTTP endpoint layer.

A snapshot directory holds everything the online path needs (method spec,
vocabulary, per-design index, design image locations). The service keeps
one immutable snapshot in memory; replacing it is an atomic reference swap
so in-flight requests finish on the snapshot they started with.
"""
from __future__ import annotations

import base64
import datetime
import io
import json
import threading
import time
import uuid
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import bovw
from .features import extract
from .harness import DEFAULT_ALPHA, FeatureStore, MethodSpec
from .model import DatasetManifest
from .saliency import GbvsConfig, gbvs_saliency, threshold_saliency

SNAPSHOT_FILE = "snapshot.json"
VOCAB_FILE = "vocab.pmvc"
INDEX_FILE = "index.pmix"


def build_snapshot(
    manifest: DatasetManifest,
    method: MethodSpec,
    out_dir: str | Path,
    seed: int = 0,
    alpha: float = DEFAULT_ALPHA,
    default_k: int = 10,
) -> Path:
    """Train the offline side for every design in the corpus and serialize it.

    Deterministic: rebuilding from the same corpus and seed writes identical
    bytes (the recorded timestamp derives from the corpus manifest file, not
    the wall clock).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    store = FeatureStore(manifest)
    design_ids = manifest.design_ids()
    if not design_ids:
        raise ValueError("corpus has no designs to index")

    if method.pathway == "local":
        if method.clusters is None:
            raise ValueError("local-pathway snapshot needs a cluster count")
        vocab = store.vocabulary(tuple(design_ids), method.feature, method.clusters, seed)
        hists = [store.design_histogram(d, method.feature, vocab) for d in design_ids]
        index = bovw.build_local_index(design_ids, hists, alpha=alpha)
        bovw.save_vocabulary(out / VOCAB_FILE, vocab)
    else:
        vectors = [store.design_features(d, method.feature) for d in design_ids]
        index = bovw.build_global_index(design_ids, vectors)
    bovw.save_index(out / INDEX_FILE, index)

    manifest_file = manifest.root / "manifest.json"
    stamp = datetime.datetime.fromtimestamp(
        int(manifest_file.stat().st_mtime), tz=datetime.timezone.utc
    ).isoformat()
    doc = {
        "format": 1,
        "feature": method.feature,
        "segmentation": method.segmentation.label,
        "clusters": method.clusters,
        "alpha": alpha,
        "seed": seed,
        "default_k": default_k,
        "build_timestamp": stamp,
        "designs": [
            {"id": d.design_id, "image": str(manifest.resolve(d.path))}
            for d in manifest.designs
        ],
    }
    (out / SNAPSHOT_FILE).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    return out


@dataclass
class Snapshot:
    feature: str
    segmentation: str
    default_k: int
    index: bovw.MatcherIndex
    vocab: bovw.Vocabulary | None
    design_images: dict[str, str]
    build_timestamp: str
    gbvs_config: GbvsConfig = GbvsConfig()

    @classmethod
    def load(cls, path: str | Path) -> "Snapshot":
        path = Path(path)
        doc = json.loads((path / SNAPSHOT_FILE).read_text(encoding="utf-8"))
        vocab = None
        if (path / VOCAB_FILE).exists():
            vocab = bovw.load_vocabulary(path / VOCAB_FILE)
        index = bovw.load_index(path / INDEX_FILE)
        return cls(
            feature=doc["feature"],
            segmentation=doc["segmentation"],
            default_k=int(doc.get("default_k", 10)),
            index=index,
            vocab=vocab,
            design_images={d["id"]: d["image"] for d in doc["designs"]},
            build_timestamp=doc.get("build_timestamp", ""),
        )

    def match(self, photo: np.ndarray, k: int) -> dict:
        """Segment, extract, rank. Returns results plus per-stage timings.

        External (offline) segmentation methods cannot run on an uploaded
        photo, so those snapshots fall back to saliency segmentation online;
        the response reports which segmentation actually ran.
        """
        timings: dict[str, float] = {}
        t0 = time.perf_counter()
        mask = None
        mask_used = "none"
        if self.segmentation != "none":
            smap = gbvs_saliency(photo, self.gbvs_config)
            mask = threshold_saliency(smap, self.gbvs_config.threshold)
            mask_used = "gbvs"
        timings["segmentation"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        query = extract(photo, self.feature, mask=mask)
        timings["extraction"] = time.perf_counter() - t0

        t0 = time.perf_counter()
        if self.index.pathway == "local":
            ranking = bovw.rank_bayes(bovw.quantize(query, self.vocab), self.index)
        else:
            ranking = bovw.rank_euclidean(query, self.index)
        timings["matching"] = time.perf_counter() - t0

        k = max(1, min(k, len(ranking.entries)))
        results = [
            {"design_id": did, "score": score, "rank": rank}
            for rank, (did, score) in enumerate(ranking.entries[:k], start=1)
        ]
        return {
            "segmentation_used": mask_used,
            "results": results,
            "timings": timings,
            "mask": mask,
        }


def _mask_to_png_base64(mask: np.ndarray | None) -> str | None:
    if mask is None:
        return None
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray((mask.astype(np.uint8) * 255), mode="L").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def create_app(snapshot_dir: str | Path | None = None,
               confirm_log: str | Path = "confirmations.log",
               static_dir: str | Path | None = None):
    """FastAPI application serving match/confirm/design endpoints."""
    from fastapi import FastAPI, File, HTTPException, UploadFile
    from fastapi.responses import FileResponse

    app = FastAPI(title="printmatch service")
    app.state.snapshot = Snapshot.load(snapshot_dir) if snapshot_dir else None
    app.state.tokens = {}
    app.state.confirm_log = Path(confirm_log)
    app.state.log_lock = threading.Lock()

    def swap_snapshot(path: str | Path) -> None:
        app.state.snapshot = Snapshot.load(path)  # atomic reference swap

    app.state.swap_snapshot = swap_snapshot

    @app.get("/api/health")
    def health():
        return {"status": "ok", "snapshot_loaded": app.state.snapshot is not None}

    @app.post("/api/match")
    async def match(photo: UploadFile = File(...), k: int | None = None):
        snapshot: Snapshot | None = app.state.snapshot
        if snapshot is None:
            raise HTTPException(status_code=503, detail="no snapshot loaded")
        total0 = time.perf_counter()
        t0 = time.perf_counter()
        payload = await photo.read()
        upload_s = time.perf_counter() - t0
        try:
            from PIL import Image

            img = np.asarray(Image.open(io.BytesIO(payload)).convert("RGB"), dtype=np.uint8)
        except Exception as e:
            raise HTTPException(status_code=400, detail=f"undecodable image: {e}") from e

        outcome = snapshot.match(img, k if k is not None else snapshot.default_k)
        token = uuid.uuid4().hex
        if len(app.state.tokens) > 10000:
            app.state.tokens.clear()
        app.state.tokens[token] = {"filename": photo.filename, "ts": time.time()}

        timings = dict(outcome["timings"])
        timings["upload"] = upload_s
        timings["total"] = time.perf_counter() - total0
        return {
            "token": token,
            "segmentation_used": outcome["segmentation_used"],
            "results": outcome["results"],
            "timings": {name: round(v, 6) for name, v in timings.items()},
            "mask_png": _mask_to_png_base64(outcome["mask"]),
        }

    @app.post("/api/confirm")
    async def confirm(body: dict):
        token = body.get("token")
        design_id = body.get("design_id")
        if not token or not design_id:
            raise HTTPException(status_code=400, detail="token and design_id required")
        if token not in app.state.tokens:
            raise HTTPException(status_code=404, detail=f"unknown token {token!r}")
        line = json.dumps(
            {"ts": datetime.datetime.now(tz=datetime.timezone.utc).isoformat(),
             "token": token, "design_id": design_id},
            sort_keys=True,
        )
        with app.state.log_lock:
            with open(app.state.confirm_log, "a", encoding="utf-8") as f:
                f.write(line + "\n")
        return {"status": "confirmed", "token": token, "design_id": design_id}

    @app.get("/api/designs/{design_id}")
    def design_meta(design_id: str):
        snapshot: Snapshot | None = app.state.snapshot
        if snapshot is None:
            raise HTTPException(status_code=503, detail="no snapshot loaded")
        if design_id not in snapshot.design_images:
            raise HTTPException(status_code=404, detail=f"unknown design {design_id!r}")
        return {"design_id": design_id, "image_url": f"/api/designs/{design_id}/image"}

    @app.get("/api/designs/{design_id}/image")
    def design_image(design_id: str):
        snapshot: Snapshot | None = app.state.snapshot
        if snapshot is None:
            raise HTTPException(status_code=503, detail="no snapshot loaded")
        path = snapshot.design_images.get(design_id)
        if path is None or not Path(path).exists():
            raise HTTPException(status_code=404, detail=f"unknown design {design_id!r}")
        return FileResponse(path, media_type="image/png")

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="console")

    return app
