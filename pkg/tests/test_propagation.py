"""Label propagation: association, blob splitting, static merging."""

import pytest

from cova.oracle import Detection
from cova.propagation import (
    FrameAnalysis,
    UNKNOWN_LABEL,
    associate,
    propagate_labels,
    split_track,
)
from cova.tracking import Track


def _det(t, bbox, label="car", conf=1.0):
    return Detection(frame_index=t, bbox_px=bbox, label=label, confidence=conf)


def _track(tid, boxes):
    frames = sorted(boxes)
    return Track(
        track_id=tid,
        status="dead",
        boxes=dict(boxes),
        start_frame=frames[0],
        end_frame=frames[-1],
    )


# -- association -------------------------------------------------------------

def test_associate_exact_match():
    matches, ub, ud = associate([(0, 0, 10, 10)], [(0, 0, 10, 10)])
    assert matches == [(0, 0, 1.0)]
    assert ub == [] and ud == []


def test_associate_threshold_is_strict():
    # Boxes with IoU exactly at the threshold stay unmatched ("larger than").
    a = (0, 0, 10, 10)
    b = (0, 5, 10, 10)  # IoU = 50/150 = 1/3
    matches, ub, ud = associate([a], [b], iou_threshold=1 / 3)
    assert matches == []
    assert ub == [0] and ud == [0]
    matches, _, _ = associate([a], [b], iou_threshold=0.33)
    assert len(matches) == 1


def test_associate_greedy_best_first():
    blobs = [(0, 0, 10, 10), (8, 0, 10, 10)]
    dets = [(7, 0, 10, 10)]
    matches, ub, ud = associate(blobs, dets, iou_threshold=0.1)
    assert matches == [(1, 0, pytest.approx(9 / 11))]
    assert ub == [0] and ud == []


def test_associate_greedy_properties(rng):
    # Best-first semantics: matches come out in descending IoU order, the
    # first match is the global maximum, nothing is reused, and every match
    # clears the threshold strictly.
    from cova.tracking import iou

    for _ in range(100):
        blobs = [tuple(rng.uniform(0, 40, size=2)) + tuple(rng.uniform(10, 30, size=2)) for _ in range(4)]
        dets = [tuple(rng.uniform(0, 40, size=2)) + tuple(rng.uniform(10, 30, size=2)) for _ in range(4)]
        thr = float(rng.uniform(0.0, 0.4))
        matches, ub, ud = associate(blobs, dets, iou_threshold=thr)
        vals = [v for _, _, v in matches]
        assert vals == sorted(vals, reverse=True)
        assert all(v > thr for v in vals)
        if matches:
            best = max(iou(b, d) for b in blobs for d in dets)
            assert vals[0] == pytest.approx(best)
        bs = [b for b, _, _ in matches]
        ds = [d for _, d, _ in matches]
        assert len(set(bs)) == len(bs) and len(set(ds)) == len(ds)
        assert sorted(bs + ub) == list(range(4))
        assert sorted(ds + ud) == list(range(4))


# -- splitting ---------------------------------------------------------------

def test_split_halves():
    boxes = {f: (float(10 * f), 0.0, 40.0, 20.0) for f in range(5)}
    dets = [_det(2, (20.0, 0.0, 20.0, 20.0), "car"), _det(2, (40.0, 0.0, 20.0, 20.0), "bus")]
    out = split_track(boxes, 2, dets)
    assert len(out) == 2
    left, right = out[0][0], out[1][0]
    for f in range(5):
        x, y, w, h = boxes[f]
        assert left[f] == (x, y, w / 2, h)
        assert right[f] == (x + w / 2, y, w / 2, h)


def test_split_requires_two_detections():
    with pytest.raises(ValueError):
        split_track({0: (0, 0, 10, 10)}, 0, [_det(0, (0, 0, 10, 10))])


def test_split_preserves_area_ratio():
    boxes = {0: (0.0, 0.0, 40.0, 40.0), 1: (5.0, 5.0, 80.0, 20.0)}
    whole = _det(0, (0.0, 0.0, 40.0, 40.0), "car")
    inner = _det(0, (10.0, 10.0, 10.0, 10.0), "bus")
    out = split_track(boxes, 0, [whole, inner])
    for f in (0, 1):
        big = out[0][0][f]
        small = out[1][0][f]
        assert small[2] * small[3] == pytest.approx(big[2] * big[3] / 16)


# -- propagation -------------------------------------------------------------

def test_propagate_full_span():
    tr = _track(0, {f: (10.0 + 2 * f, 20.0, 30.0, 30.0) for f in range(5, 21)})
    dets = {12: [_det(12, (10.0 + 2 * 12, 20.0, 30.0, 30.0), "car")]}
    fa, stats = propagate_labels([tr], [12], dets, 25)
    for f in range(5, 21):
        labels = [o.label for o in fa.frames[f] if o.source == "propagated"]
        assert labels == ["car"]
    assert fa.frames[4] == []
    anchor_entries = [o for o in fa.frames[12] if o.source == "anchor_detected"]
    assert len(anchor_entries) == 1


def test_unmatched_track_gets_unknown():
    tr = _track(0, {f: (0.0, 0.0, 20.0, 20.0) for f in range(3)})
    fa, _ = propagate_labels([tr], [1], {1: []}, 5)
    assert {o.label for o in fa.frames[1]} == {UNKNOWN_LABEL}


def test_drop_unknown_mode():
    tr = _track(0, {f: (0.0, 0.0, 20.0, 20.0) for f in range(3)})
    fa, _ = propagate_labels([tr], [1], {1: []}, 5, drop_unknown=True)
    assert all(not objs for objs in fa.frames)


def test_label_conflict_highest_confidence_wins():
    tr = _track(0, {f: (0.0, 0.0, 20.0, 20.0) for f in range(10)})
    dets = {
        2: [_det(2, (0.0, 0.0, 20.0, 20.0), "car", conf=0.6)],
        7: [_det(7, (0.0, 0.0, 20.0, 20.0), "bus", conf=0.9)],
    }
    fa, stats = propagate_labels([tr], [2, 7], dets, 12)
    assert stats["label_conflicts"] == 1
    labels = {o.label for o in fa.frames[4] if o.source == "propagated"}
    assert labels == {"bus"}


def test_multi_object_split_on_anchor():
    # One merged blob track overlapped by two detections splits into two
    # sub-tracks, each propagating its own label.
    tr = _track(0, {f: (0.0, 0.0, 40.0, 20.0) for f in range(6)})
    dets = {
        3: [
            _det(3, (0.0, 0.0, 25.0, 20.0), "car"),  # IoU 0.625 vs the blob
            _det(3, (15.0, 0.0, 25.0, 20.0), "bus"),
        ]
    }
    fa, stats = propagate_labels([tr], [3], dets, 8)
    assert stats["splits"] == 1
    for f in range(6):
        props = [o for o in fa.frames[f] if o.source == "propagated"]
        assert sorted(o.label for o in props) == ["bus", "car"]
        ids = {o.track_id for o in props}
        assert len(ids) == 2


def test_split_conservation():
    # No detection orphaned: each split detection owns exactly one sub-track.
    tr = _track(0, {f: (0.0, 0.0, 60.0, 20.0) for f in range(4)})
    dets = {
        1: [
            _det(1, (0.0, 0.0, 20.0, 20.0), "car"),
            _det(1, (20.0, 0.0, 20.0, 20.0), "bus"),
            _det(1, (40.0, 0.0, 20.0, 20.0), "person"),
        ]
    }
    fa, stats = propagate_labels([tr], [1], dets, 5, iou_threshold=0.25)
    anchor_dets = [o for o in fa.frames[1] if o.source == "anchor_detected"]
    assert sorted(o.label for o in anchor_dets) == ["bus", "car", "person"]
    assert len({o.track_id for o in anchor_dets}) == 3


def test_static_merge_three_anchors():
    bbox = (50.0, 50.0, 30.0, 30.0)
    dets = {a: [_det(a, bbox, "bus")] for a in (10, 20, 30)}
    fa, stats = propagate_labels([], [10, 20, 30], dets, 40)
    assert stats["static_tracks"] == 1
    for f in range(10, 31):
        assert [o.label for o in fa.frames[f]] == ["bus"]
        assert fa.frames[f][0].source == "static_merged"
    assert fa.frames[9] == [] and fa.frames[31] == []


def test_static_merge_label_gate():
    bbox = (50.0, 50.0, 30.0, 30.0)
    dets = {10: [_det(10, bbox, "bus")], 20: [_det(20, bbox, "car")]}
    _, stats = propagate_labels([], [10, 20], dets, 30)
    assert stats["static_tracks"] == 0


def test_static_merge_iou_gate():
    # A translating box drops below the 0.7 IoU gate between anchors.
    dets = {
        10: [_det(10, (0.0, 0.0, 30.0, 30.0), "car")],
        20: [_det(20, (20.0, 0.0, 30.0, 30.0), "car")],  # IoU = 10/50 = 0.2
    }
    _, stats = propagate_labels([], [10, 20], dets, 30)
    assert stats["static_tracks"] == 0


def test_single_anchor_no_static_track():
    dets = {10: [_det(10, (0.0, 0.0, 30.0, 30.0), "car")]}
    _, stats = propagate_labels([], [10], dets, 20)
    assert stats["static_tracks"] == 0


def test_entries_within_track_span(rng):
    tracks = []
    for tid in range(5):
        start = int(rng.integers(0, 30))
        end = start + int(rng.integers(0, 15))
        tracks.append(
            _track(tid, {f: (float(f), 0.0, 20.0, 20.0) for f in range(start, end + 1)})
        )
    anchors = sorted({int(rng.integers(0, 50)) for _ in range(6)})
    fa, _ = propagate_labels(tracks, anchors, {}, 50)
    spans = {tr.track_id: (tr.start_frame, tr.end_frame) for tr in tracks}
    for f, objs in enumerate(fa.frames):
        for o in objs:
            if o.source == "propagated" and o.track_id in spans:
                lo, hi = spans[o.track_id]
                assert lo <= f <= hi


def test_propagation_pure():
    tr = _track(0, {f: (0.0, 0.0, 20.0, 20.0) for f in range(5)})
    dets = {2: [_det(2, (0.0, 0.0, 20.0, 20.0), "car")]}
    a, _ = propagate_labels([_track(0, dict(tr.boxes))], [2], dets, 8)
    b, _ = propagate_labels([_track(0, dict(tr.boxes))], [2], dets, 8)
    assert a.dumps() == b.dumps()


def test_frame_analysis_round_trip(tmp_path):
    tr = _track(3, {f: (1.5, 2.25, 20.0, 20.0) for f in range(4)})
    dets = {2: [_det(2, (1.5, 2.25, 20.0, 20.0), "person")]}
    fa, _ = propagate_labels([tr], [2], dets, 6, video_id="vid", config_hash="abc")
    path = tmp_path / "a.jsonl"
    fa.save(path)
    again = FrameAnalysis.load(path)
    assert again.num_frames == 6
    assert again.video_id == "vid" and again.config_hash == "abc"
    assert again.dumps() == fa.dumps()
