"""printmatch command line: corpus generation, extraction, benchmark, service."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bovw, harness, synth
from .imageio import load_png, write_pgm
from .model import load_manifest
from .segmentation import SegmentationMethod, segment


def _cmd_gen(args) -> int:
    manifest = synth.gen_corpus(
        out_dir=args.out,
        n_products=args.products,
        n_photos=args.photos,
        preset=args.preset,
        two_sided_fraction=args.two_sided,
        seed=args.seed,
        design_size=args.size,
    )
    print(f"wrote corpus: {len(manifest.products)} products, "
          f"{len(manifest.designs)} designs, {len(manifest.photos)} photos -> {args.out}")
    return 0


def _cmd_segment(args) -> int:
    method = SegmentationMethod.parse(args.method)
    manifest = load_manifest(Path(args.corpus) / "manifest.json") if args.corpus else None
    photo = load_png(args.photo)
    photo_id = args.photo_id or Path(args.photo).stem
    mask = segment(photo, method, manifest, photo_id)
    write_pgm(args.out, mask)
    print(f"wrote {args.out} ({int(mask.sum())} of {mask.size} pixels set)")
    return 0


def _cmd_extract(args) -> int:
    manifest = load_manifest(Path(args.corpus) / "manifest.json")
    store = harness.FeatureStore(manifest, cache_dir=args.cache)
    seg = SegmentationMethod.parse(args.seg)
    for design_id in manifest.design_ids():
        store.design_features(design_id, args.method)
    for photo_id in manifest.photo_ids():
        store.photo_features(photo_id, args.method, seg)
    print(f"cached {args.method} features ({len(manifest.designs)} designs, "
          f"{len(manifest.photos)} photos, segmentation {seg.label}) -> {args.cache}")
    return 0


def _cmd_train_vocab(args) -> int:
    manifest = load_manifest(Path(args.corpus) / "manifest.json")
    store = harness.FeatureStore(manifest, cache_dir=args.cache)
    vocab = store.vocabulary(tuple(manifest.design_ids()), args.feature,
                             args.clusters, args.seed)
    bovw.save_vocabulary(args.out, vocab)
    print(f"trained {vocab.n_clusters}-word vocabulary "
          f"({vocab.iterations} iterations, inertia {vocab.inertia:.3e}) -> {args.out}")
    return 0


def _cmd_build_snapshot(args) -> int:
    from .service import build_snapshot

    manifest = load_manifest(Path(args.corpus) / "manifest.json")
    method = harness.MethodSpec.parse(args.method, clusters=args.clusters)
    build_snapshot(manifest, method, args.out, seed=args.seed, default_k=args.k)
    print(f"snapshot for {method.name} -> {args.out}")
    return 0


def _cmd_match(args) -> int:
    from .service import Snapshot

    snapshot = Snapshot.load(args.index)
    photo = load_png(args.query)
    outcome = snapshot.match(photo, args.k)
    for row in outcome["results"]:
        print(f"{row['rank']:3d}  {row['design_id']}  {row['score']:.4f}")
    timings = ", ".join(f"{k}={v:.3f}s" for k, v in outcome["timings"].items())
    print(f"segmentation: {outcome['segmentation_used']}; {timings}")
    return 0


def _cmd_bench(args) -> int:
    manifest = load_manifest(Path(args.corpus) / "manifest.json")
    if args.methods:
        text = Path(args.methods).read_text(encoding="utf-8")
        names = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        methods = [harness.MethodSpec.parse(n, clusters=args.clusters) for n in names]
    else:
        methods = harness.default_method_list(clusters=args.clusters)
    results = harness.run_benchmark(
        manifest, methods,
        n_experiments=args.experiments, seed=args.seed,
        n_photos=args.photos, n_designs=args.designs,
        cache_dir=args.cache, out_dir=args.out,
    )
    for name in sorted(results):
        curve = results[name]["curve"]
        print(f"{name:24s} top-1 {curve.at(1):.3f}  top-10 {curve.at(min(10, len(curve))):.3f}")
    print(f"report -> {args.out}")
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(snapshot_dir=args.snapshot, confirm_log=args.log,
                     static_dir=args.static)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="printmatch")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a synthetic corpus")
    p.add_argument("--products", type=int, required=True)
    p.add_argument("--photos", type=int, required=True)
    p.add_argument("--preset", choices=sorted(synth.PRESETS), default="mild")
    p.add_argument("--two-sided", type=float, default=0.25,
                   help="fraction of products with a second design file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=448, help="design raster side, px")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("segment", help="write a segmentation mask for one photo")
    p.add_argument("--method", required=True,
                   help="none|manual|gbvs|external:NAME")
    p.add_argument("--photo", required=True)
    p.add_argument("--photo-id", default=None,
                   help="manifest photo id when it differs from the file stem")
    p.add_argument("--corpus", default=None,
                   help="corpus dir (needed for manual/external methods)")
    p.add_argument("--out", required=True, help="output mask (P5 PGM)")
    p.set_defaults(fn=_cmd_segment)

    p = sub.add_parser("extract", help="cache features for a whole corpus")
    p.add_argument("--method", required=True, choices=["sift", "dsift", "hog", "gist"])
    p.add_argument("--seg", default="none", help="photo segmentation method")
    p.add_argument("--corpus", required=True)
    p.add_argument("--cache", required=True)
    p.set_defaults(fn=_cmd_extract)

    p = sub.add_parser("train-vocab", help="train a visual vocabulary on the designs")
    p.add_argument("--clusters", type=int, default=harness.DEFAULT_CLUSTERS)
    p.add_argument("--feature", default="sift", choices=["sift", "dsift", "hog"])
    p.add_argument("--corpus", required=True)
    p.add_argument("--cache", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_train_vocab)

    p = sub.add_parser("build-snapshot", help="build the service index snapshot")
    p.add_argument("--corpus", required=True)
    p.add_argument("--method", default="sift-gbvs")
    p.add_argument("--clusters", type=int, default=harness.DEFAULT_CLUSTERS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_build_snapshot)

    p = sub.add_parser("match", help="rank designs for one photo against a snapshot")
    p.add_argument("--query", required=True)
    p.add_argument("--index", required=True, help="snapshot directory")
    p.add_argument("--k", type=int, default=10)
    p.set_defaults(fn=_cmd_match)

    p = sub.add_parser("bench", help="run the benchmark matrix")
    p.add_argument("--corpus", required=True)
    p.add_argument("--methods", default=None,
                   help="file with one method per line; default: shipped 26-method list")
    p.add_argument("--experiments", type=int, default=20)
    p.add_argument("--photos", type=int, default=harness.DEFAULT_PHOTOS_PER_SET)
    p.add_argument("--designs", type=int, default=harness.DEFAULT_DESIGNS_PER_SET)
    p.add_argument("--clusters", type=int, default=harness.DEFAULT_CLUSTERS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cache", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=_cmd_bench)

    p = sub.add_parser("serve", help="run the matching service")
    p.add_argument("--snapshot", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--log", default="confirmations.log")
    p.add_argument("--static", default=None, help="static console assets to serve at /")
    p.set_defaults(fn=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
