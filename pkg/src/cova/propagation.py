"""Label propagation: anchor-frame detections are associated with tracks,
multi-object blobs are split, labels are copied across full track extents, and
static objects are merged across anchors into synthetic tracks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .tracking import iou

DEFAULT_IOU_THRESHOLD = 0.5
STATIC_IOU_THRESHOLD = 0.7
UNKNOWN_LABEL = "unknown"

ANALYSIS_VERSION = 1


@dataclass(frozen=True)
class AnalyzedObject:
    track_id: int
    label: str
    bbox_px: tuple
    source: str  # propagated | anchor_detected | static_merged

    def as_doc(self):
        return {
            "track_id": self.track_id,
            "label": self.label,
            "bbox": [round(float(v), 3) for v in self.bbox_px],
            "source": self.source,
        }

    @classmethod
    def from_doc(cls, doc):
        return cls(
            track_id=doc["track_id"],
            label=doc["label"],
            bbox_px=tuple(doc["bbox"]),
            source=doc["source"],
        )


class FrameAnalysis:
    """Query-agnostic per-frame object lists covering every stream frame."""

    def __init__(self, num_frames, video_id="", config_hash=""):
        self.num_frames = num_frames
        self.video_id = video_id
        self.config_hash = config_hash
        self.frames = [[] for _ in range(num_frames)]

    def add(self, frame_index, obj):
        self.frames[frame_index].append(obj)

    def objects_at(self, frame_index):
        return self.frames[frame_index]

    def sort_entries(self):
        """Canonical in-frame ordering so serialization is scheduling-independent."""
        for objs in self.frames:
            objs.sort(key=lambda o: (o.track_id, o.source, o.label, o.bbox_px))

    def dumps(self):
        self.sort_entries()
        lines = [
            json.dumps(
                {
                    "type": "header",
                    "version": ANALYSIS_VERSION,
                    "num_frames": self.num_frames,
                    "video_id": self.video_id,
                    "config_hash": self.config_hash,
                },
                sort_keys=True,
            )
        ]
        for i, objs in enumerate(self.frames):
            lines.append(
                json.dumps(
                    {"frame_index": i, "objects": [o.as_doc() for o in objs]},
                    sort_keys=True,
                )
            )
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w") as f:
            f.write(self.dumps())

    @classmethod
    def load(cls, path):
        with open(path) as f:
            lines = [ln for ln in f.read().splitlines() if ln.strip()]
        head = json.loads(lines[0])
        fa = cls(head["num_frames"], head.get("video_id", ""), head.get("config_hash", ""))
        for line in lines[1:]:
            rec = json.loads(line)
            fa.frames[rec["frame_index"]] = [
                AnalyzedObject.from_doc(d) for d in rec["objects"]
            ]
        return fa


# ---------------------------------------------------------------------------
# association

def associate(blob_boxes, det_boxes, iou_threshold=DEFAULT_IOU_THRESHOLD):
    """Greedy best-IoU matching, each side used once; strictly-above threshold.

    Returns (matches, unmatched_blob_idx, unmatched_det_idx) where matches are
    (blob_idx, det_idx, iou) triples.
    """
    pairs = []
    for bi, bb in enumerate(blob_boxes):
        for di, db in enumerate(det_boxes):
            v = iou(bb, db)
            if v > iou_threshold:
                pairs.append((-v, bi, di))
    pairs.sort()
    used_b, used_d = set(), set()
    matches = []
    for neg, bi, di in pairs:
        if bi in used_b or di in used_d:
            continue
        used_b.add(bi)
        used_d.add(di)
        matches.append((bi, di, -neg))
    unmatched_b = [i for i in range(len(blob_boxes)) if i not in used_b]
    unmatched_d = [i for i in range(len(det_boxes)) if i not in used_d]
    return matches, unmatched_b, unmatched_d


def split_track(track_boxes, anchor_frame, detections):
    """Split a track whose anchor-frame blob covers several detections.

    Each detection's rectangle, normalized against the anchor-frame blob box,
    is projected onto the blob box of every frame in the track.  Returns
    [(sub_track_boxes, detection)]; fresh ids are assigned by the caller.
    """
    if len(detections) < 2:
        raise ValueError("split requires at least two overlapping detections")
    X, Y, W, H = track_boxes[anchor_frame]
    out = []
    for det in detections:
        dx, dy, dw, dh = det.bbox_px
        nx, ny = (dx - X) / W, (dy - Y) / H
        nw, nh = dw / W, dh / H
        boxes = {
            f: (x + nx * w, y + ny * h, nw * w, nh * h)
            for f, (x, y, w, h) in track_boxes.items()
        }
        out.append((boxes, det))
    return out


# ---------------------------------------------------------------------------
# propagation

@dataclass
class _Assembled:
    track: object
    boxes: dict
    matches: list = field(default_factory=list)  # (anchor_frame, Detection, iou)


def propagate_labels(tracks, anchor_frames, detections_by_frame, num_frames,
                     iou_threshold=DEFAULT_IOU_THRESHOLD,
                     static_iou=STATIC_IOU_THRESHOLD,
                     drop_unknown=False,
                     video_id="", config_hash=""):
    """Full stage-3 pass: association, splitting, propagation, static merge.

    Returns (FrameAnalysis, stats dict).
    """
    anchors = sorted(set(anchor_frames))
    live = [_Assembled(track=tr, boxes=dict(tr.boxes)) for tr in tracks]
    next_id = 1 + max((tr.track_id for tr in tracks), default=-1)
    unmatched_by_anchor = {}
    stats = {"label_conflicts": 0, "splits": 0, "static_tracks": 0}

    for a in anchors:
        dets = detections_by_frame.get(a, [])
        idx = [i for i, asm in enumerate(live) if asm.track.start_frame <= a <= asm.track.end_frame]
        boxes = [live[i].boxes[a] for i in idx]

        # Multi-object splitting: a single blob box overlapped by >= 2
        # detections spawns one sub-track per detection.
        consumed = set()
        split_out = []
        retired = set()
        for pos, i in enumerate(idx):
            over = [
                di for di, d in enumerate(dets)
                if di not in consumed and iou(boxes[pos], d.bbox_px) > iou_threshold
            ]
            if len(over) >= 2:
                for sub_boxes, det in split_track(
                    live[i].boxes, a, [dets[di] for di in over]
                ):
                    sub = _Assembled(track=live[i].track, boxes=sub_boxes)
                    sub.matches.append((a, det, det.confidence))
                    sub.sub_id = next_id
                    next_id += 1
                    split_out.append(sub)
                consumed.update(over)
                retired.add(i)
                stats["splits"] += 1

        idx2 = [i for i in idx if i not in retired]
        boxes2 = [live[i].boxes[a] for i in idx2]
        det_idx2 = [di for di in range(len(dets)) if di not in consumed]
        matches, _, unmatched_d = associate(
            boxes2, [dets[di].bbox_px for di in det_idx2], iou_threshold
        )
        for bi, di, v in matches:
            det = dets[det_idx2[di]]
            live[idx2[bi]].matches.append((a, det, det.confidence * v))
        unmatched_by_anchor[a] = [dets[det_idx2[di]] for di in unmatched_d]

        live = [asm for i, asm in enumerate(live) if i not in retired] + split_out
        # Re-sort for deterministic processing order at later anchors.
        live.sort(key=lambda asm: (asm.track.track_id, getattr(asm, "sub_id", -1)))

    fa = FrameAnalysis(num_frames, video_id=video_id, config_hash=config_hash)
    anchor_set = set(anchors)
    for asm in live:
        if asm.matches:
            # Conflicting labels across anchors: highest confidence wins.
            labels = {det.label for _, det, _ in asm.matches}
            if len(labels) > 1:
                stats["label_conflicts"] += 1
            best = max(asm.matches, key=lambda m: (m[2], -m[0]))
            label = best[1].label
        else:
            if drop_unknown:
                continue
            label = UNKNOWN_LABEL
        tid = getattr(asm, "sub_id", asm.track.track_id)
        for f, bbox in sorted(asm.boxes.items()):
            fa.add(f, AnalyzedObject(tid, label, tuple(bbox), "propagated"))
        for a, det, _ in asm.matches:
            fa.add(a, AnalyzedObject(tid, det.label, tuple(det.bbox_px), "anchor_detected"))

    _merge_static(fa, anchors, unmatched_by_anchor, static_iou, stats, next_id)
    fa.sort_entries()
    return fa, stats


def _merge_static(fa, anchors, unmatched_by_anchor, static_iou, stats, next_id):
    """Chain same-label detections that sit still across consecutive anchors."""
    open_chains = []  # (label, last_det, first_anchor, last_anchor, segments)
    closed = []
    for a in anchors:
        dets = unmatched_by_anchor.get(a, [])
        still_open = []
        used = set()
        for label, last_det, first_a, last_a, segs in open_chains:
            hit = None
            for di, d in enumerate(dets):
                if di in used:
                    continue
                if d.label == label and iou(last_det.bbox_px, d.bbox_px) > static_iou:
                    hit = di
                    break
            if hit is not None:
                used.add(hit)
                segs.append((a, dets[hit]))
                still_open.append((label, dets[hit], first_a, a, segs))
            else:
                closed.append((first_a, last_a, segs))
        for di, d in enumerate(dets):
            if di not in used:
                still_open.append((d.label, d, a, a, [(a, d)]))
        open_chains = still_open
    closed.extend((first_a, last_a, segs) for _, _, first_a, last_a, segs in open_chains)

    for first_a, last_a, segs in sorted(closed, key=lambda c: (c[0], c[1])):
        if len(segs) < 2:
            continue  # a chain needs at least two anchors
        tid = next_id
        next_id += 1
        stats["static_tracks"] += 1
        label = segs[0][1].label
        for si, (a, det) in enumerate(segs):
            end = segs[si + 1][0] - 1 if si + 1 < len(segs) else a
            for f in range(a, end + 1):
                fa.add(f, AnalyzedObject(tid, label, tuple(det.bbox_px), "static_merged"))
