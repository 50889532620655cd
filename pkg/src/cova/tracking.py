"""Blob extraction from bitmaps and SORT-style multi-object tracking
(constant-velocity Kalman filter + IoU-cost Hungarian association)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .assignment import hungarian

MB_SIZE = 16

DEFAULT_IOU_MIN = 0.3
DEFAULT_MAX_AGE = 3
DEFAULT_MIN_HITS = 2
MIN_CELLS = 2


@dataclass(frozen=True)
class Blob:
    frame_index: int
    bbox_mb: tuple  # (x, y, w, h) in macroblock units
    cells: int

    @property
    def bbox_px(self):
        x, y, w, h = self.bbox_mb
        return (x * MB_SIZE, y * MB_SIZE, w * MB_SIZE, h * MB_SIZE)


def connected_components(bitmap, frame_index=0, min_cells=MIN_CELLS):
    """8-connectivity components of a binary macroblock grid, as Blobs.

    Components smaller than min_cells are treated as metadata noise.
    """
    bitmap = np.ascontiguousarray(bitmap, dtype=np.uint8)
    labels = kernels.label_components(bitmap)
    blobs = []
    for li in range(1, int(labels.max()) + 1):
        ys, xs = np.nonzero(labels == li)
        if len(ys) < min_cells:
            continue
        x0, x1 = int(xs.min()), int(xs.max())
        y0, y1 = int(ys.min()), int(ys.max())
        blobs.append(
            Blob(
                frame_index=frame_index,
                bbox_mb=(x0, y0, x1 - x0 + 1, y1 - y0 + 1),
                cells=len(ys),
            )
        )
    return blobs


def iou(a, b):
    """Intersection over union of two (x, y, w, h) boxes."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    ix = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    if union <= 0:
        return 0.0
    return inter / union


# ---------------------------------------------------------------------------
# Kalman filter over (u, v, s, r, du, dv, ds): box center, area, aspect ratio.

_F = np.eye(7)
_F[0, 4] = _F[1, 5] = _F[2, 6] = 1.0
_H = np.eye(4, 7)
_R = np.diag([1.0, 1.0, 10.0, 10.0])
_Q = np.diag([1.0, 1.0, 1.0, 1.0, 0.01, 0.01, 0.0001])
_P0 = np.diag([10.0, 10.0, 10.0, 10.0, 1e4, 1e4, 1e4])

_SCALE_EPS = 1e-6


def bbox_to_z(bbox):
    x, y, w, h = bbox
    return np.array([x + w / 2.0, y + h / 2.0, float(w) * h, w / float(h)])


def z_to_bbox(z):
    u, v, s, r = z[:4]
    w = np.sqrt(max(s * r, _SCALE_EPS))
    h = max(s, _SCALE_EPS) / w
    return (u - w / 2.0, v - h / 2.0, w, h)


class KalmanBoxState:
    def __init__(self, bbox):
        self.x = np.zeros(7)
        self.x[:4] = bbox_to_z(bbox)
        self.P = _P0.copy()
        self.frames_since_update = 0
        self.hit_streak = 0
        self.clamp_count = 0

    def predict(self):
        self.x = _F @ self.x
        if self.x[2] <= 0:
            self.x[2] = _SCALE_EPS
            self.x[6] = 0.0
            self.clamp_count += 1
        self.P = _F @ self.P @ _F.T + _Q
        self.P = (self.P + self.P.T) / 2.0
        return self

    def update(self, bbox):
        z = bbox_to_z(bbox)
        y = z - _H @ self.x
        S = _H @ self.P @ _H.T + _R
        K = self.P @ _H.T @ np.linalg.inv(S)
        self.x = self.x + K @ y
        self.P = (np.eye(7) - K @ _H) @ self.P
        self.P = (self.P + self.P.T) / 2.0
        return self

    @property
    def bbox(self):
        return z_to_bbox(self.x)


def kalman_predict(state):
    return state.predict()


def kalman_update(state, bbox):
    return state.update(bbox)


# ---------------------------------------------------------------------------
# tracks

@dataclass
class Track:
    track_id: int
    status: str = "tentative"  # tentative | confirmed | dead
    anchor_assigned: bool = False
    boxes: dict = field(default_factory=dict)  # frame -> blob bbox_px
    start_frame: int = -1
    end_frame: int = -1

    def bbox_at(self, frame):
        return self.boxes[frame]

    def frames(self):
        return range(self.start_frame, self.end_frame + 1)


class _LiveTrack:
    def __init__(self, track_id, blob, t, min_hits):
        self.track = Track(track_id=track_id)
        self.kf = KalmanBoxState(blob.bbox_px)
        self.hits = 1
        self.age_since_update = 0
        self.last_matched = t
        self.pending = {t: blob.bbox_px}
        if min_hits <= 1:
            self._confirm(t)

    def _confirm(self, t):
        self.track.status = "confirmed"
        # Coverage starts at the confirming frame; earlier tentative frames
        # are warm-up and are dropped.
        self.track.start_frame = t
        self.track.end_frame = t
        self.track.boxes = {t: self.pending[t]}

    def match(self, blob, t, min_hits):
        self.kf.update(blob.bbox_px)
        self.hits += 1
        self.age_since_update = 0
        self.last_matched = t
        self.pending[t] = blob.bbox_px
        if self.track.status == "tentative":
            if self.hits >= min_hits:
                self._confirm(t)
        else:
            self.track.boxes[t] = blob.bbox_px
            self.track.end_frame = t

    def coast(self, t, predicted_bbox):
        self.age_since_update += 1
        if self.track.status == "confirmed":
            self.track.boxes[t] = predicted_bbox
            self.track.end_frame = t

    def close(self):
        """Terminate at the last matched frame, dropping coasted predictions."""
        tr = self.track
        if tr.status != "confirmed":
            tr.status = "dead"
            return None
        tr.end_frame = self.last_matched
        tr.boxes = {f: b for f, b in tr.boxes.items() if f <= tr.end_frame}
        tr.status = "dead"
        return tr


class BlobTracker:
    """One tracker per chunk; frames must be fed in strictly increasing order."""

    def __init__(self, iou_min=DEFAULT_IOU_MIN, max_age=DEFAULT_MAX_AGE,
                 min_hits=DEFAULT_MIN_HITS, id_offset=0):
        self.iou_min = iou_min
        self.max_age = max_age
        self.min_hits = min_hits
        self.next_id = id_offset
        self.live = []
        self.finished = []
        self.last_t = None

    def step(self, t, blobs):
        if self.last_t is not None and t <= self.last_t:
            raise ValueError(f"non-monotone frame order: {t} after {self.last_t}")
        self.last_t = t
        for b in blobs:
            if b.frame_index != t:
                raise ValueError(f"blob at frame {b.frame_index} fed to step {t}")

        predicted = [lt.kf.predict().bbox for lt in self.live]

        matched_tracks = set()
        matched_blobs = set()
        if self.live and blobs:
            cost = np.array(
                [[1.0 - iou(p, b.bbox_px) for b in blobs] for p in predicted]
            )
            for ti, bi in hungarian(cost):
                if 1.0 - cost[ti, bi] < self.iou_min:
                    continue
                self.live[ti].match(blobs[bi], t, self.min_hits)
                matched_tracks.add(ti)
                matched_blobs.add(bi)

        survivors = []
        for ti, lt in enumerate(self.live):
            if ti in matched_tracks:
                survivors.append(lt)
                continue
            lt.coast(t, predicted[ti])
            if lt.age_since_update > self.max_age:
                tr = lt.close()
                if tr is not None:
                    self.finished.append(tr)
            else:
                survivors.append(lt)
        self.live = survivors

        for bi, blob in enumerate(blobs):
            if bi not in matched_blobs:
                self.live.append(_LiveTrack(self.next_id, blob, t, self.min_hits))
                self.next_id += 1

    def finalize(self):
        """Close all live tracks and return every confirmed track, by start."""
        for lt in self.live:
            tr = lt.close()
            if tr is not None:
                self.finished.append(tr)
        self.live = []
        return sorted(self.finished, key=lambda tr: (tr.start_frame, tr.track_id))

    def tracks(self):
        """Confirmed tracks so far, including still-live ones (not closed)."""
        out = list(self.finished)
        out.extend(lt.track for lt in self.live if lt.track.status == "confirmed")
        return sorted(out, key=lambda tr: (tr.start_frame, tr.track_id))
