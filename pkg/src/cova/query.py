"""Query engine over persisted per-frame analysis results: binary-predicate
and count queries, their region-restricted variants, and metric evaluation
against scene ground truth."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

REGION_PRESETS = {
    "upper-left": (0.0, 0.0, 0.5, 0.5),
    "upper-right": (0.5, 0.0, 1.0, 0.5),
    "lower-left": (0.0, 0.5, 0.5, 1.0),
    "lower-right": (0.5, 0.5, 1.0, 1.0),
    "full": (0.0, 0.0, 1.0, 1.0),
}

TEMPORAL_KINDS = ("BP", "CNT")
LOCAL_KINDS = ("LBP", "LCNT")


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class Region:
    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"degenerate region {self}")

    @classmethod
    def preset(cls, name):
        return cls(*REGION_PRESETS[name])

    def contains_center(self, bbox, width, height):
        """Membership by normalized bbox center (the one containment rule)."""
        x, y, w, h = bbox
        nx = (x + w / 2.0) / width
        ny = (y + h / 2.0) / height
        return self.x0 <= nx <= self.x1 and self.y0 <= ny <= self.y1


@dataclass(frozen=True)
class Query:
    kind: str  # BP | CNT | LBP | LCNT
    label: str
    region: Region | None = None

    def __post_init__(self):
        if self.kind not in TEMPORAL_KINDS + LOCAL_KINDS:
            raise ValueError(f"unknown query kind {self.kind!r}")
        if self.kind in LOCAL_KINDS and self.region is None:
            raise ValueError(f"{self.kind} query requires a region")
        if self.kind in TEMPORAL_KINDS and self.region is not None:
            raise ValueError(f"{self.kind} query takes no region")


def _frame_count(objects, q, width, height):
    n = 0
    for obj in objects:
        if obj.label != q.label:
            continue
        if q.region is not None and not q.region.contains_center(obj.bbox_px, width, height):
            continue
        n += 1
    return n


def run_query(analysis, q: Query, width, height):
    """BP/LBP -> set of frame indices; CNT/LCNT -> mean count per frame."""
    known = {o.label for objs in analysis.frames for o in objs}
    if q.label not in known:
        warnings.warn(f"label {q.label!r} never appears in the analysis")
    counts = [_frame_count(objs, q, width, height) for objs in analysis.frames]
    if q.kind in ("BP", "LBP"):
        return {i for i, n in enumerate(counts) if n > 0}
    return sum(counts) / len(counts) if counts else 0.0


# ---------------------------------------------------------------------------
# ground truth + metrics

def ground_truth_counts(scene, q: Query):
    """Per-frame ground-truth counts under the same label/region rules."""
    config = scene.config
    counts = []
    for t in range(config.num_frames):
        n = 0
        for obj in scene.objects_at(t):
            if obj.label != q.label:
                continue
            if q.region is not None and not q.region.contains_center(
                obj.bbox_at(t), config.width_px, config.height_px
            ):
                continue
            n += 1
        counts.append(n)
    return counts


def ground_truth_result(scene, q: Query):
    counts = ground_truth_counts(scene, q)
    if q.kind in ("BP", "LBP"):
        return {i for i, n in enumerate(counts) if n > 0}
    return sum(counts) / len(counts) if counts else 0.0


def evaluate(result, truth, q: Query, num_frames=None):
    """BP/LBP: classification accuracy over frames; CNT/LCNT: absolute error."""
    if q.kind in ("BP", "LBP"):
        if num_frames is None:
            raise EvaluationError("accuracy evaluation needs the frame count")
        bad = [i for i in result | truth if not 0 <= i < num_frames]
        if bad:
            raise EvaluationError(f"frame indices outside stream: {bad[:3]}")
        agree = num_frames - len(result ^ truth)
        return agree / num_frames
    return abs(result - truth)
