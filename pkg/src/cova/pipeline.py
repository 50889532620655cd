"""End-to-end orchestration: chunked stage-1 processing (features -> BlobNet
-> components -> tracking), per-GoP anchor selection, batched oracle
detection, label propagation, persistence, and reporting."""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict


from . import blobnet, mog, propagation, selection, tracking
from .blobnet import BlobNetModel, TrainConfig
from .features import window_arrays, assemble_features
from .metadata import split_gops, chunk_gop_list
from .oracle import OracleNoise, detect_batch
from .scene import render_frame
from .selection import make_report, select_anchors
from .tracking import BlobTracker, connected_components

TRACK_ID_STRIDE = 1_000_000


class PipelineError(RuntimeError):
    pass


@dataclass
class PipelineConfig:
    worker_count: int = 1
    chunk_gops: int = 4  # chunk size is fixed in GoPs so results never depend
                         # on worker_count
    train: TrainConfig = field(default_factory=TrainConfig)
    threshold: float = 0.5
    iou_min: float = tracking.DEFAULT_IOU_MIN
    max_age: int = tracking.DEFAULT_MAX_AGE
    min_hits: int = tracking.DEFAULT_MIN_HITS
    min_cells: int = tracking.MIN_CELLS
    iou_threshold: float = propagation.DEFAULT_IOU_THRESHOLD
    static_iou: float = propagation.STATIC_IOU_THRESHOLD
    drop_unknown: bool = False
    noise: OracleNoise = field(default_factory=OracleNoise)
    seed: int = 0

    def validate(self):
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")
        if self.chunk_gops < 1:
            raise ValueError("chunk_gops must be >= 1")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0, 1)")
        self.noise.validate()

    def hash(self):
        doc = asdict(self)
        doc.pop("worker_count")  # scheduling must not change outputs
        blob = json.dumps(doc, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class PipelineReport:
    total_frames: int = 0
    decoded_frames: int = 0
    anchor_frames: int = 0
    decode_filtration_rate: float = 1.0
    inference_filtration_rate: float = 1.0
    effective_decode_speedup: float = float("inf")
    chunk_count: int = 0
    track_count: int = 0
    blob_frames: int = 0
    label_conflicts: int = 0
    splits: int = 0
    static_tracks: int = 0
    # Wall-clock per stage (seconds); metadata-domain frames/sec, not
    # comparable to hardware decoder numbers.
    wall_clock: dict = field(default_factory=dict)

    def as_dict(self):
        return asdict(self)


def collect_training_set(scene, stream, cfg: TrainConfig, burn_in=0):
    """Auto-labeled training pairs from the leading train_fraction of video.

    Pixel frames feed the background-subtraction labeler; metadata windows of
    the configured temporal depth pair with the mask-derived grid targets.
    """
    n = max(int(round(cfg.train_fraction * len(stream.frames))), cfg.temporal_depth + 1)
    n = min(n, len(stream.frames))
    h = stream.header.height_px
    w = stream.header.width_px
    state = mog.MoGState.create(h, w)
    targets = []
    for t in range(n):
        _, mask = mog.mog_step(state, render_frame(scene, t))
        targets.append(mog.make_targets(mask))
    dataset = []
    T = cfg.temporal_depth
    for t in range(max(T - 1, burn_in), n):
        window = stream.frames[t - T + 1 : t + 1]
        combo, mv_norm = window_arrays(window)
        dataset.append((combo, mv_norm, targets[t]))
    return dataset


def train_model(scene, stream, cfg: TrainConfig) -> BlobNetModel:
    dataset = collect_training_set(scene, stream, cfg)
    model = BlobNetModel.create(temporal_depth=cfg.temporal_depth, seed=cfg.seed)
    return blobnet.blobnet_train(model, dataset, cfg)


def _frame_window(frames, i, depth):
    """Chunk-local trailing window, left-padded by repeating the first frame."""
    window = frames[max(0, i - depth + 1) : i + 1]
    return [frames[0]] * (depth - len(window)) + list(window)


def detect_blobs(frame_window, model, threshold, min_cells):
    combo, mv_norm = window_arrays(frame_window)
    feats = assemble_features(combo, mv_norm, model.params["emb"])
    probs = blobnet.blobnet_forward(model, feats)
    mask = blobnet.threshold_mask(probs, threshold)
    return connected_components(
        mask, frame_index=frame_window[-1].frame_index, min_cells=min_cells
    )


def process_chunk(chunk_index, gops, model, config: PipelineConfig):
    """Stage 1 + 2 for one chunk of whole GoPs; self-contained and pure."""
    frames = [f for gop in gops for f in gop.frames]
    tracker = BlobTracker(
        iou_min=config.iou_min,
        max_age=config.max_age,
        min_hits=config.min_hits,
        id_offset=chunk_index * TRACK_ID_STRIDE,
    )
    blob_frames = 0
    t0 = time.perf_counter()
    for i, frame in enumerate(frames):
        window = _frame_window(frames, i, model.temporal_depth)
        blobs = detect_blobs(window, model, config.threshold, config.min_cells)
        if blobs:
            blob_frames += 1
        tracker.step(frame.frame_index, blobs)
    tracks = tracker.finalize()
    t1 = time.perf_counter()
    plans = [select_anchors(gop, tracks) for gop in gops]
    t2 = time.perf_counter()
    return {
        "chunk_index": chunk_index,
        "tracks": tracks,
        "plans": plans,
        "blob_frames": blob_frames,
        "wall_track": t1 - t0,
        "wall_select": t2 - t1,
    }


def _chunk_worker(args):
    chunk_index, gops, model_params, depth, config = args
    model = BlobNetModel(model_params, depth)
    try:
        return process_chunk(chunk_index, gops, model, config)
    except Exception as e:
        frame = getattr(e, "frame_index", None)
        raise PipelineError(f"chunk {chunk_index} failed (frame {frame}): {e}") from e


def run_pipeline(scene, stream, model, config: PipelineConfig):
    """Run the three-stage cascade; returns (FrameAnalysis, PipelineReport)."""
    config.validate()
    gops = split_gops(stream)
    chunk_count = max(1, -(-len(gops) // config.chunk_gops))
    chunks = chunk_gop_list(gops, chunk_count)
    num_frames = len(stream.frames)
    report = PipelineReport(total_frames=num_frames, chunk_count=len(chunks))

    jobs = [
        (ci, chunk, model.params, model.temporal_depth, config)
        for ci, chunk in enumerate(chunks)
    ]
    t0 = time.perf_counter()
    if config.worker_count > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=config.worker_count) as pool:
            results = list(pool.map(_chunk_worker, jobs))
    else:
        results = [_chunk_worker(job) for job in jobs]
    results.sort(key=lambda r: r["chunk_index"])
    t1 = time.perf_counter()

    tracks = [tr for r in results for tr in r["tracks"]]
    plans = [p for r in results for p in r["plans"]]
    report.blob_frames = sum(r["blob_frames"] for r in results)

    # Rewrite chunk-namespaced ids to dense global ids, in (chunk, local) order.
    for new_id, tr in enumerate(sorted(tracks, key=lambda tr: tr.track_id)):
        tr.track_id = new_id
    report.track_count = len(tracks)

    sel = make_report(plans, num_frames)
    report.decoded_frames = sel.decoded_frames
    report.anchor_frames = sel.anchor_frames
    report.decode_filtration_rate = sel.decode_filtration_rate
    report.inference_filtration_rate = sel.inference_filtration_rate
    if sel.decoded_frames:
        report.effective_decode_speedup = num_frames / sel.decoded_frames

    anchors = sorted({a for p in plans for a in p.anchor_frames})
    detections = detect_batch(scene, anchors, config.noise)
    t2 = time.perf_counter()

    analysis, stats = propagation.propagate_labels(
        tracks,
        anchors,
        detections,
        num_frames,
        iou_threshold=config.iou_threshold,
        static_iou=config.static_iou,
        drop_unknown=config.drop_unknown,
        video_id=stream.header.codec,
        config_hash=config.hash(),
    )
    t3 = time.perf_counter()
    report.label_conflicts = stats["label_conflicts"]
    report.splits = stats["splits"]
    report.static_tracks = stats["static_tracks"]
    report.wall_clock = {
        "track_detection_s": round(t1 - t0, 4),
        "oracle_detection_s": round(t2 - t1, 4),
        "propagation_s": round(t3 - t2, 4),
        "metadata_fps": round(num_frames / (t1 - t0), 1) if t1 > t0 else 0.0,
    }
    return analysis, report


# ---------------------------------------------------------------------------
# track dump / plan files (debugging surfaces)

def dump_tracks(tracks, path):
    with open(path, "w") as f:
        for tr in tracks:
            doc = {
                "track_id": tr.track_id,
                "status": tr.status,
                "start_frame": tr.start_frame,
                "end_frame": tr.end_frame,
                "anchor_assigned": tr.anchor_assigned,
                "boxes": {str(fr): [round(float(v), 3) for v in b] for fr, b in sorted(tr.boxes.items())},
            }
            f.write(json.dumps(doc, sort_keys=True) + "\n")


def load_tracks(path):
    tracks = []
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            doc = json.loads(line)
            tracks.append(
                tracking.Track(
                    track_id=doc["track_id"],
                    status=doc["status"],
                    anchor_assigned=doc.get("anchor_assigned", False),
                    boxes={int(k): tuple(v) for k, v in doc["boxes"].items()},
                    start_frame=doc["start_frame"],
                    end_frame=doc["end_frame"],
                )
            )
    return tracks


def dump_plans(plans, path):
    with open(path, "w") as f:
        for p in plans:
            doc = {
                "gop_index": p.gop_index,
                "anchor_frames": sorted(p.anchor_frames),
                "decode_frames": sorted(p.decode_frames),
                "track_anchors": {str(k): v for k, v in sorted(p.track_anchors.items())},
            }
            f.write(json.dumps(doc, sort_keys=True) + "\n")
