"""Algorithm 1 anchor selection: hand traces and randomized coverage."""

import numpy as np
import pytest

from cova.metadata import FrameMeta, GoP, MB_I, MB_P
from cova.selection import make_report, select_anchors
from cova.tracking import Track


def _gop(first, length, gop_index=0):
    frames = []
    for k in range(length):
        ftype = "I" if k == 0 else "P"
        code = MB_I if k == 0 else MB_P
        frames.append(
            FrameMeta(
                frame_index=first + k,
                frame_type=ftype,
                gop_index=gop_index,
                mb_type=np.full((2, 2), code, dtype=np.uint8),
                partition=np.zeros((2, 2), dtype=np.uint8),
                mv=np.zeros((2, 2, 2), dtype=np.int16),
            )
        )
    return GoP(frames=frames)


def _track(tid, start, end, confirmed=True):
    return Track(
        track_id=tid,
        status="confirmed" if confirmed else "dead",
        boxes={f: (0, 0, 16, 16) for f in range(start, end + 1)},
        start_frame=start,
        end_frame=end,
    )


def test_no_terminating_tracks():
    plan = select_anchors(_gop(0, 10), [])
    assert plan.anchor_frames == set()
    assert plan.decode_frames == set()


def test_hand_trace_x_y():
    # GoP of 10 (I@0); X spans [1,3], Y spans [2,8].
    # Walk: candidate<-1 (X starts), candidate<-2 (Y starts); X ends at 3 so
    # anchor 2 joins afs with closure {0,1}; Y ends at 8, candidate still 2,
    # set-add is idempotent.  Final afs={2}, dfs={0,1,2}.
    x, y = _track(0, 1, 3), _track(1, 2, 8)
    plan = select_anchors(_gop(0, 10), [x, y])
    assert plan.anchor_frames == {2}
    assert plan.decode_frames == {0, 1, 2}
    assert plan.track_anchors == {0: 2, 1: 2}
    assert x.anchor_assigned and y.anchor_assigned


def test_hand_trace_fig6_frame_two():
    # Tracks a, b start before "frame 2" of the GoP, c starts at it; all end
    # later in the GoP.  The anchor is c's start frame: every object is
    # present there and it has the fewest dependents.
    gop = _gop(10, 10, gop_index=1)
    a = _track(0, 4, 14)   # started in an earlier GoP
    b = _track(1, 11, 15)
    c = _track(2, 12, 18)
    plan = select_anchors(gop, [a, b, c])
    assert plan.anchor_frames == {12}
    assert plan.decode_frames == {10, 11, 12}
    assert plan.track_anchors == {0: 12, 1: 12, 2: 12}


def test_hand_trace_two_anchors():
    # Two disjoint terminations force two anchors.
    gop = _gop(0, 20)
    a = _track(0, 2, 5)
    b = _track(1, 9, 14)
    plan = select_anchors(gop, [a, b])
    assert plan.anchor_frames == {2, 9}
    assert plan.decode_frames == set(range(10))
    assert plan.track_anchors == {0: 2, 1: 9}


def test_track_ending_at_iframe():
    # A track terminating exactly at the GoP's I-frame anchors there at zero
    # decode cost.
    gop = _gop(10, 10, gop_index=1)
    tr = _track(0, 4, 10)
    plan = select_anchors(gop, [tr])
    assert plan.anchor_frames == {10}
    assert plan.decode_frames == {10}


def test_already_anchored_tracks_ignored():
    tr = _track(0, 1, 5)
    tr.anchor_assigned = True
    plan = select_anchors(_gop(0, 10), [tr])
    assert plan.anchor_frames == set()


def test_anchor_within_track_span_randomized(rng):
    # Coverage invariant over 1000 randomized GoP/track instances.
    for _ in range(1000):
        gop_len = int(rng.integers(2, 30))
        first = int(rng.integers(0, 5)) * gop_len
        gop = _gop(first, gop_len)
        tracks = []
        for tid in range(int(rng.integers(1, 6))):
            end = int(rng.integers(first, first + gop_len))
            start = int(rng.integers(max(0, end - 40), end + 1))
            tracks.append(_track(tid, start, end))
        plan = select_anchors(gop, tracks)
        for tr in tracks:
            assert tr.anchor_assigned
            a = plan.track_anchors[tr.track_id]
            assert tr.start_frame <= a <= tr.end_frame
            assert a in plan.anchor_frames
        assert plan.anchor_frames <= plan.decode_frames
        for f in plan.decode_frames:
            assert first <= f < first + gop_len


def test_monotonicity_removing_tracks(rng):
    for _ in range(200):
        gop_len = int(rng.integers(3, 20))
        gop = _gop(0, gop_len)
        tracks = [
            _track(tid, int(rng.integers(0, gop_len - 1)), 0)
            for tid in range(int(rng.integers(2, 5)))
        ]
        for tr in tracks:
            tr.end_frame = int(rng.integers(tr.start_frame, gop_len - 1))
            tr.boxes = {f: (0, 0, 16, 16) for f in range(tr.start_frame, tr.end_frame + 1)}
        full = select_anchors(_gop(0, gop_len), [_track(t.track_id, t.start_frame, t.end_frame) for t in tracks])
        fewer = select_anchors(_gop(0, gop_len), [_track(t.track_id, t.start_frame, t.end_frame) for t in tracks[:-1]])
        assert len(fewer.decode_frames) <= len(full.decode_frames)


def test_idempotent_anchor_sets():
    # The same candidate serving several terminations adds decode work once.
    gop = _gop(0, 12)
    tracks = [_track(i, 3, 5 + i) for i in range(4)]
    plan = select_anchors(gop, tracks)
    assert plan.anchor_frames == {3}
    assert plan.decode_frames == {0, 1, 2, 3}


def test_make_report_arithmetic():
    from cova.selection import AnchorPlan

    plans = [
        AnchorPlan(gop_index=0, anchor_frames={3, 7}, decode_frames=set(range(8))),
        AnchorPlan(gop_index=1, anchor_frames={52, 60}, decode_frames=set(range(50, 67))),
    ]
    rep = make_report(plans, 100)
    assert rep.decoded_frames == 25
    assert rep.anchor_frames == 4
    assert rep.decode_filtration_rate == pytest.approx(0.75)
    assert rep.inference_filtration_rate == pytest.approx(0.96)


def test_make_report_zero_tracks():
    rep = make_report([], 500)
    assert rep.decode_filtration_rate == 1.0
    assert rep.inference_filtration_rate == 1.0
