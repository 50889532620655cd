"""Detector oracle: stands in for the full DNN detector on decoded anchor
frames, backed by scene ground truth with configurable error injection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tracking import iou


@dataclass(frozen=True)
class OracleNoise:
    miss_prob: float = 0.0
    misclassify_prob: float = 0.0
    jitter_sigma: float = 0.0
    small_object_miss_area: float = 0.0  # px^2; below this, miss_prob doubles
    seed: int = 0

    def validate(self):
        if not 0.0 <= self.miss_prob < 1.0:
            raise ValueError("miss_prob must be in [0, 1)")
        if not 0.0 <= self.misclassify_prob < 1.0:
            raise ValueError("misclassify_prob must be in [0, 1)")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")


NOISELESS = OracleNoise()


@dataclass(frozen=True)
class Detection:
    frame_index: int
    bbox_px: tuple
    label: str
    confidence: float


def detect(scene, frame_index, noise: OracleNoise = NOISELESS):
    """Detections for one frame: pure in (noise.seed, frame_index, object_id)."""
    noise.validate()
    config = scene.config
    if not 0 <= frame_index < config.num_frames:
        raise IndexError(f"frame {frame_index} out of scene range")
    detections = []
    for obj in scene.objects_at(frame_index):
        rng = np.random.default_rng([noise.seed, 0xD7, frame_index, obj.object_id])
        bbox = obj.bbox_at(frame_index)
        miss_p = noise.miss_prob
        if noise.small_object_miss_area > 0 and bbox[2] * bbox[3] < noise.small_object_miss_area:
            miss_p = min(2.0 * miss_p, 0.99)
        if rng.random() < miss_p:
            continue
        label = obj.label
        if noise.misclassify_prob > 0 and rng.random() < noise.misclassify_prob:
            label = str(rng.choice(config.label_set))
        out_bbox = bbox
        confidence = 1.0
        if noise.jitter_sigma > 0:
            x, y, w, h = bbox
            dx, dy = rng.normal(0.0, noise.jitter_sigma, size=2)
            x = float(np.clip(x + dx, 0, config.width_px - w))
            y = float(np.clip(y + dy, 0, config.height_px - h))
            out_bbox = (x, y, float(w), float(h))
            confidence = max(iou(bbox, out_bbox), 1e-3)
        detections.append(
            Detection(
                frame_index=frame_index,
                bbox_px=out_bbox,
                label=label,
                confidence=confidence,
            )
        )
    return detections


def detect_batch(scene, frame_indices, noise: OracleNoise = NOISELESS):
    """Batched evaluation of many anchor frames; order never changes results."""
    return {fi: detect(scene, fi, noise) for fi in sorted(set(frame_indices))}
