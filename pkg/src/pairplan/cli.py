"""Command-line entry point: ``pairplan {plan,compare,render,loss,dwt,config}``.

Exit codes: 0 success, 2 validation error, 3 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io as _io
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np
from PIL import Image
from pydantic import ValidationError

from . import baselines, io, splat, view_graph, wavelet
from .config import RunConfig, load_config

log = logging.getLogger("pairplan")

EXIT_OK, EXIT_VALIDATION, EXIT_IO = 0, 2, 3
COMPARE_STRATEGIES = ("gaps", "complete", "oneref", "window")


class UsageError(ValueError):
    pass


def _setup_logging() -> None:
    level = os.environ.get("PAIRPLAN_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)


def image_descriptor(path) -> np.ndarray:
    """32x32 grayscale thumbnail, mean-subtracted and flattened."""
    with Image.open(path) as img:
        thumb = img.convert("L").resize((32, 32), Image.BILINEAR)
    vec = np.asarray(thumb, dtype=np.float64).ravel() / 255.0
    return vec - vec.mean()


def _pairs_for_strategy(cfg: RunConfig, n: int, images=None):
    """Any strategy as a PairingPlan; baseline edges weigh 1 (cosine: similarity)."""
    if cfg.strategy == "gaps":
        return view_graph.plan_gaps(cfg.gaps.problem(n), cfg.mode)
    if cfg.strategy == "complete":
        pairs = baselines.complete_pairs(n)
        sims = None
    elif cfg.strategy == "oneref":
        pairs = baselines.oneref_pairs(n, cfg.oneref_ref)
        sims = None
    elif cfg.strategy == "window":
        pairs = baselines.window_pairs(n, cfg.window)
        sims = None
    elif cfg.strategy == "cosine":
        if images is None:
            raise UsageError("strategy 'cosine' needs --views-dir (descriptors come from images)")
        feats = [baselines.FeatureVector(image_descriptor(p), k) for k, p in enumerate(images)]
        pairs = baselines.cosine_pairs(feats, cfg.cosine.k_nearest, cfg.cosine.sim_min)
        sims = baselines.cosine_similarity_matrix(feats)
    else:  # pragma: no cover - guarded by config validation
        raise UsageError(f"unknown strategy {cfg.strategy}")
    params = cfg.gaps.problem(n).params
    edges = []
    for i, j in sorted({(min(p), max(p)) for p in pairs}):
        d = view_graph.circular_distance(i, j, n)
        w = 1.0 if sims is None else max(float(sims[i, j]), 0.0)
        edges.append(view_graph.CandidateEdge(i, j, d, view_graph.classify_range(d, params), w))
    plan = view_graph.PairingPlan.from_edges(edges)
    return view_graph.PairingPlan(
        plan.edges, plan.total_weight, tuple(view_graph.expand_to_directed_pairs(plan, cfg.mode))
    )


def build_plan_report(cfg: RunConfig, n: int, images=None) -> tuple[dict, view_graph.PairingPlan]:
    if n < 2:
        raise UsageError(f"need at least 2 views, got n={n}")
    plan = _pairs_for_strategy(cfg, n, images)
    doc = view_graph.plan_to_dict(plan, n, cfg.mode)
    undirected = len(plan.edges)
    directed = 2 * undirected
    count = directed if cfg.count == "directed" else undirected
    connected, components = view_graph.check_connectivity(plan, n)
    doc.update(
        {
            "strategy": cfg.strategy,
            "count_mode": cfg.count,
            "pair_count": count,
            "pair_count_directed": directed,
            "pair_count_undirected": undirected,
            "estimated_mb": baselines.estimate_inference_cost(count, cfg.cost.per_pair_mb, cfg.cost.base_mb),
            "connected": connected,
            "components": components,
        }
    )
    if images is not None:
        doc["views"] = [p.name for p in images]
    return doc, plan


def _check_readable(paths) -> None:
    for p in paths:
        try:
            with Image.open(p) as img:
                img.verify()
        except Exception as exc:
            raise OSError(f"cannot read image {p}: {exc}") from exc


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_plan(cfg: RunConfig, args) -> int:
    images = None
    views_dir = args.views_dir or cfg.views_dir
    if views_dir:
        images = io.list_images(views_dir)
        if len(images) < 2:
            raise UsageError(f"need at least 2 images in {views_dir}, found {len(images)}")
        _check_readable(images)
        n = len(images)
    elif args.n is not None:
        n = args.n
    else:
        raise UsageError("plan needs --n or --views-dir")
    doc, plan = build_plan_report(cfg, n, images)
    out = args.out or cfg.out
    if args.format == "dot":
        _emit(view_graph.plan_to_dot(plan, n, cfg.strategy), out)
    else:
        _emit(io.dumps_json(doc), out)
        if args.dot:
            Path(args.dot).write_text(view_graph.plan_to_dot(plan, n, cfg.strategy))
    return EXIT_OK


def compare_rows(cfg: RunConfig, ns, strategies) -> list[dict]:
    rows = []
    for strategy in strategies:
        if strategy == "cosine":
            raise UsageError("strategy 'cosine' cannot be compared without images")
        sub = cfg.model_copy(update={"strategy": strategy})
        for n in ns:
            doc, _ = build_plan_report(sub, n)
            rows.append({"strategy": strategy, "n": n, "pairs": doc["pair_count"], "estimated_mb": doc["estimated_mb"]})
    return rows


def cmd_compare(cfg: RunConfig, args) -> int:
    ns = [int(v) for v in args.n_range.split(",") if v.strip()]
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    rows = compare_rows(cfg, ns, strategies)
    buf = _io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=["strategy", "n", "pairs", "estimated_mb"], lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    _emit(buf.getvalue(), args.out or cfg.out)
    return EXIT_OK


def cmd_render(cfg: RunConfig, args) -> int:
    scene, cams = splat.make_fixture_scene(args.preset, args.seed, args.cameras)
    out = Path(args.out or cfg.out or "frames")
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for k, cam in enumerate(cams):
        frame = splat.render(scene, cam)
        png = f"view_{k:02d}.png"
        depth = f"view_{k:02d}_depth.bin"
        io.write_png(out / png, frame.color)
        io.write_dump(out / depth, frame.depth, kind="depth")
        io.write_dump(out / f"view_{k:02d}_color.bin", frame.color, kind="color")
        records.append({"index": k, "image": png, "depth": depth, "camera": cam.to_dict()})
    manifest = {"preset": args.preset, "seed": args.seed, "views": records}
    (out / "manifest.json").write_text(io.dumps_json(manifest))
    (out / "scene.json").write_text(
        io.dumps_json({"primitives": [p.to_dict() for p in scene], "cameras": [c.to_dict() for c in cams]})
    )
    log.info("wrote %d frames to %s", len(cams), out)
    return EXIT_OK


def loss_report(cfg: RunConfig, gt: np.ndarray, rendered: np.ndarray) -> dict:
    if gt.shape != rendered.shape:
        raise UsageError(f"dimension mismatch: gt {gt.shape} vs rendered {rendered.shape}")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = wavelet.combined_loss(
            gt, rendered, cfg.wavelet.spec(), cfg.wavelet.photometric_weight, cfg.wavelet.wavelet_weight
        )
    doc = report.to_dict()
    doc["warnings"] = [str(w.message) for w in caught]
    for w in caught:
        log.warning("%s", w.message)
    return doc


def cmd_loss(cfg: RunConfig, args) -> int:
    gt = io.read_image(args.gt)
    rendered = io.read_image(args.rendered)
    _emit(io.dumps_json(loss_report(cfg, gt, rendered)), args.out or cfg.out)
    return EXIT_OK


def cmd_dwt(cfg: RunConfig, args) -> int:
    image = io.read_image(args.image)
    spec = cfg.wavelet.spec()
    pyramid = wavelet.dwt2_multi(wavelet._channels_first(image), spec)
    out = args.out or cfg.out or str(Path(args.image).with_suffix(".pyr.bin"))
    io.write_pyramid_dump(out, pyramid, {"filter": spec.filter, "levels": spec.levels, "input_shape": list(image.shape)})
    return EXIT_OK


def cmd_config(cfg: RunConfig, args) -> int:
    _emit(cfg.dump(), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--strategy", choices=["gaps", "complete", "oneref", "cosine", "window"])
    common.add_argument("--mode", choices=["both", "forward"])
    common.add_argument("--seed", type=int, default=0)

    parser = argparse.ArgumentParser(prog="pairplan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", parents=[common], help="select image pairs")
    p.add_argument("--n", type=int)
    p.add_argument("--views-dir")
    p.add_argument("--format", choices=["json", "dot"], default="json")
    p.add_argument("--dot", help="also write a DOT graph to this path")
    p.add_argument("--count", choices=["directed", "undirected"])
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("compare", parents=[common], help="pair counts and cost per strategy")
    p.add_argument("--n-range", default="3,6,9,12")
    p.add_argument("--strategies", default=",".join(COMPARE_STRATEGIES))
    p.add_argument("--format", choices=["csv"], default="csv")
    p.add_argument("--count", choices=["directed", "undirected"])
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("render", parents=[common], help="render a fixture scene")
    p.add_argument("--preset", default="arch")
    p.add_argument("--cameras", type=int)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("loss", parents=[common], help="wavelet-regularized loss between two images")
    p.add_argument("gt")
    p.add_argument("rendered")
    p.add_argument("--format", choices=["json"], default="json")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("dwt", parents=[common], help="dump a wavelet pyramid")
    p.add_argument("image")
    p.set_defaults(func=cmd_dwt)

    p = sub.add_parser("config", parents=[common], help="print the effective configuration")
    p.set_defaults(func=cmd_config)
    return parser


def _effective_config(args) -> RunConfig:
    cfg = load_config(args.config)
    update = {}
    for key in ("strategy", "mode", "count"):
        val = getattr(args, key, None)
        if val is not None:
            update[key] = val
    if update:
        cfg = RunConfig.model_validate({**cfg.model_dump(), **update})
    return cfg


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _effective_config(args)
        return args.func(cfg, args)
    except ValidationError as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
