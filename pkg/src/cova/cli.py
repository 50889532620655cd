"""cova command line: gen | train | validate | analyze | tracks | plan |
query | report.  Exit codes: 0 ok, 2 configuration error, 3 data error."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import pipeline
from .blobnet import BlobNetModel, TrainConfig
from .metadata import ParseError, StructureError, read_stream, split_gops, write_stream
from .oracle import OracleNoise
from .pipeline import PipelineConfig, run_pipeline, train_model
from .propagation import FrameAnalysis
from .query import REGION_PRESETS, Query, Region, evaluate, ground_truth_result, run_query
from .scene import ConfigError, Scene, SceneConfig, encode_metadata, generate_scene, render_frame, write_pgm
from .selection import make_report, select_anchors

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3

PRESETS = {
    "empty": dict(object_spawn_rate=0.0, static_object_count=0, num_frames=500),
    "sparse": dict(object_spawn_rate=0.01, static_object_count=1, num_frames=5000,
                   gop_length=50),
    "busy": dict(object_spawn_rate=0.05, static_object_count=2, num_frames=2000,
                 gop_length=50, mv_noise_sigma=1.0, texture_noise_rate=0.01),
}


def _seed_default():
    env = os.environ.get("COVA_SEED")
    return int(env) if env else 0


def _load_config_file(path):
    with open(path, "rb") as f:
        return tomllib.load(f)


def _build_parser():
    ap = argparse.ArgumentParser(prog="cova")
    ap.add_argument("--config", help="TOML config file with default option values")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic scene + metadata stream")
    g.add_argument("--preset", choices=sorted(PRESETS), default="sparse")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--frames", type=int, default=None, help="override frame count")
    g.add_argument("--gop", type=int, default=None, help="override GoP length")
    g.add_argument("--width", type=int, default=320)
    g.add_argument("--height", type=int, default=192)
    g.add_argument("--all-frames", action="store_true",
                   help="write every frame as PGM (default: training prefix only)")

    t = sub.add_parser("train", help="train the blob segmentation model")
    t.add_argument("--scene", required=True)
    t.add_argument("--video", required=True, help="metadata stream (JSONL)")
    t.add_argument("--out", required=True)
    t.add_argument("--frames", type=float, default=0.03, help="training fraction")
    t.add_argument("--depth", type=int, default=2)
    t.add_argument("--epochs", type=int, default=25)
    t.add_argument("--lr", type=float, default=0.01)
    t.add_argument("--seed", type=int, default=None)

    v = sub.add_parser("validate", help="validate a metadata container")
    v.add_argument("file")

    a = sub.add_parser("analyze", help="run the full cascade and persist results")
    a.add_argument("--scene", required=True)
    a.add_argument("--stream", required=True)
    a.add_argument("--model")
    a.add_argument("--train", action="store_true", help="train a model first")
    a.add_argument("--train-frames", type=float, default=0.1,
                   help="training fraction when --train is given")
    a.add_argument("--out", required=True)
    a.add_argument("--workers", type=int, default=1)
    a.add_argument("--seed", type=int, default=None)
    a.add_argument("--miss-prob", type=float, default=0.0)
    a.add_argument("--misclassify-prob", type=float, default=0.0)
    a.add_argument("--jitter-sigma", type=float, default=0.0)

    tr = sub.add_parser("tracks", help="dump stage-1 tracks for debugging")
    tr.add_argument("--stream", required=True)
    tr.add_argument("--model", required=True)
    tr.add_argument("--out", required=True)

    p = sub.add_parser("plan", help="anchor selection from a tracks dump")
    p.add_argument("--tracks", required=True)
    p.add_argument("--stream", required=True)
    p.add_argument("--out", required=True)

    q = sub.add_parser("query", help="query a persisted analysis")
    q.add_argument("--analysis", required=True)
    q.add_argument("--kind", required=True, choices=["bp", "cnt", "lbp", "lcnt"])
    q.add_argument("--label", required=True)
    q.add_argument("--region", choices=sorted(REGION_PRESETS))
    q.add_argument("--width", type=int, default=None, help="frame width (else from scene)")
    q.add_argument("--height", type=int, default=None)
    q.add_argument("--eval", dest="eval_scene", help="scene JSON for metric evaluation")

    r = sub.add_parser("report", help="print the report from a previous analyze run")
    r.add_argument("--analysis", required=True)
    return ap


def _report_path(analysis_path):
    return str(analysis_path) + ".report.json"


def _cmd_gen(args):
    preset = dict(PRESETS[args.preset])
    if args.frames:
        preset["num_frames"] = args.frames
    if args.gop:
        preset["gop_length"] = args.gop
    config = SceneConfig(
        width_px=args.width, height_px=args.height,
        seed=args.seed if args.seed is not None else _seed_default(), **preset,
    )
    scn = generate_scene(config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scn.save(out / "scene.json")
    write_stream(encode_metadata(scn), out / "meta.jsonl")
    frames_dir = out / "frames"
    frames_dir.mkdir(exist_ok=True)
    n = config.num_frames if args.all_frames else max(
        int(round(0.03 * config.num_frames)), 1
    )
    for t in range(n):
        write_pgm(render_frame(scn, t), frames_dir / f"{t:06d}.pgm")
    print(json.dumps({"scene": str(out / "scene.json"),
                      "stream": str(out / "meta.jsonl"),
                      "frames_written": n,
                      "objects": len(scn.objects)}))
    return EXIT_OK


def _cmd_train(args):
    scn = Scene.load(args.scene)
    stream = read_stream(args.video)
    cfg = TrainConfig(
        learning_rate=args.lr, epochs=args.epochs, temporal_depth=args.depth,
        train_fraction=args.frames,
        seed=args.seed if args.seed is not None else _seed_default(),
    )
    model = train_model(scn, stream, cfg)
    model.save(args.out)
    print(json.dumps({"model": args.out,
                      "parameters": model.num_parameters(),
                      "initial_loss": model.initial_loss,
                      "final_loss": model.final_loss}))
    return EXIT_OK


def _cmd_validate(args):
    stream = read_stream(args.file)
    gops = split_gops(stream)
    print(json.dumps({"frames": len(stream.frames), "gops": len(gops),
                      "grid": list(stream.header.mb_shape), "ok": True}))
    return EXIT_OK


def _cmd_analyze(args):
    scn = Scene.load(args.scene)
    stream = read_stream(args.stream)
    seed = args.seed if args.seed is not None else _seed_default()
    cfg = PipelineConfig(
        worker_count=args.workers,
        seed=seed,
        train=TrainConfig(seed=seed, train_fraction=args.train_frames),
        noise=OracleNoise(miss_prob=args.miss_prob,
                          misclassify_prob=args.misclassify_prob,
                          jitter_sigma=args.jitter_sigma, seed=seed),
    )
    if args.model:
        model = BlobNetModel.load(args.model)
    elif args.train:
        model = train_model(scn, stream, cfg.train)
    else:
        print("error: --model or --train required", file=sys.stderr)
        return EXIT_CONFIG
    analysis, report = run_pipeline(scn, stream, model, cfg)
    analysis.save(args.out)
    with open(_report_path(args.out), "w") as f:
        json.dump(report.as_dict(), f, sort_keys=True, indent=2)
    print(json.dumps({"analysis": args.out,
                      "decode_filtration_rate": report.decode_filtration_rate,
                      "inference_filtration_rate": report.inference_filtration_rate}))
    return EXIT_OK


def _cmd_tracks(args):
    stream = read_stream(args.stream)
    model = BlobNetModel.load(args.model)
    cfg = PipelineConfig()
    gops = split_gops(stream)
    result = pipeline.process_chunk(0, gops, model, cfg)
    pipeline.dump_tracks(result["tracks"], args.out)
    print(json.dumps({"tracks": len(result["tracks"]), "out": args.out}))
    return EXIT_OK


def _cmd_plan(args):
    stream = read_stream(args.stream)
    tracks = pipeline.load_tracks(args.tracks)
    plans = [select_anchors(gop, tracks) for gop in split_gops(stream)]
    pipeline.dump_plans(plans, args.out)
    print(json.dumps(make_report(plans, len(stream.frames)).as_dict()))
    return EXIT_OK


def _cmd_query(args):
    analysis = FrameAnalysis.load(args.analysis)
    kind = args.kind.upper()
    if kind in ("LBP", "LCNT") and args.region is None:
        print("error: local queries require --region", file=sys.stderr)
        return EXIT_CONFIG
    region = Region.preset(args.region) if kind in ("LBP", "LCNT") else None
    q = Query(kind=kind, label=args.label, region=region)
    width, height = args.width, args.height
    scn = Scene.load(args.eval_scene) if args.eval_scene else None
    if (width is None or height is None):
        if scn is None:
            print("error: --width/--height or --eval scene required", file=sys.stderr)
            return EXIT_CONFIG
        width, height = scn.config.width_px, scn.config.height_px
    result = run_query(analysis, q, width, height)
    doc = {"kind": kind, "label": args.label}
    if kind in ("BP", "LBP"):
        doc["frames"] = sorted(result)
        doc["positive_frames"] = len(result)
    else:
        doc["mean_count"] = result
    if scn is not None:
        truth = ground_truth_result(scn, q)
        metric = evaluate(result, truth, q, num_frames=analysis.num_frames)
        doc["metric"] = "accuracy" if kind in ("BP", "LBP") else "absolute_error"
        doc["value"] = metric
    print(json.dumps(doc, sort_keys=True))
    return EXIT_OK


def _cmd_report(args):
    path = _report_path(args.analysis)
    with open(path) as f:
        print(f.read().strip())
    return EXIT_OK


_COMMANDS = {
    "gen": _cmd_gen,
    "train": _cmd_train,
    "validate": _cmd_validate,
    "analyze": _cmd_analyze,
    "tracks": _cmd_tracks,
    "plan": _cmd_plan,
    "query": _cmd_query,
    "report": _cmd_report,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CONFIG if e.code not in (0, None) else EXIT_OK
    if args.config:
        try:
            defaults = _load_config_file(args.config)
        except (OSError, tomllib.TOMLDecodeError) as e:
            print(f"error: bad config file: {e}", file=sys.stderr)
            return EXIT_CONFIG
        for key, value in defaults.items():
            attr = key.replace("-", "_")
            if hasattr(args, attr) and getattr(args, attr) in (None, False):
                setattr(args, attr, value)
    try:
        return _COMMANDS[args.command](args)
    except (ParseError, StructureError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
