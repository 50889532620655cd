"""Track-aware anchor-frame selection per GoP and decode-set accounting."""

from __future__ import annotations

from dataclasses import dataclass, field

from .metadata import dependent_frames


@dataclass
class AnchorPlan:
    gop_index: int
    anchor_frames: set = field(default_factory=set)  # global frame indices
    decode_frames: set = field(default_factory=set)  # anchors + dependency closures
    track_anchors: dict = field(default_factory=dict)  # track_id -> anchor frame


@dataclass
class SelectionReport:
    total_frames: int
    decoded_frames: int
    anchor_frames: int

    @property
    def decode_filtration_rate(self):
        if self.total_frames == 0:
            return 1.0
        return 1.0 - self.decoded_frames / self.total_frames

    @property
    def inference_filtration_rate(self):
        if self.total_frames == 0:
            return 1.0
        return 1.0 - self.anchor_frames / self.total_frames

    def as_dict(self):
        return {
            "total_frames": self.total_frames,
            "decoded_frames": self.decoded_frames,
            "anchor_frames": self.anchor_frames,
            "decode_filtration_rate": self.decode_filtration_rate,
            "inference_filtration_rate": self.inference_filtration_rate,
        }


def select_anchors(gop, tracks) -> AnchorPlan:
    """Greedy candidate-anchor walk over one GoP.

    Considers only tracks that terminate in this GoP and have no anchor yet.
    A frame where a considered track starts becomes the anchor candidate; when
    a considered track ends, the current candidate joins the anchor set along
    with its decode-dependency closure.  Tracks that started in earlier GoPs
    contribute their start event at the GoP's first frame.  Served tracks get
    anchor_assigned set.
    """
    first, last = gop.first_index, gop.last_index
    plan = AnchorPlan(gop_index=gop.frames[0].gop_index)
    current = [
        tr for tr in tracks
        if not tr.anchor_assigned and first <= tr.end_frame <= last
    ]
    if not current:
        return plan

    starts = {}
    ends = {}
    for tr in current:
        starts.setdefault(max(tr.start_frame, first), []).append(tr)
        ends.setdefault(tr.end_frame, []).append(tr)

    candidate = None
    for pos, frame in enumerate(gop.frames):
        fi = frame.frame_index
        if fi in starts:
            candidate = (fi, pos)
        if fi in ends:
            if candidate is None:
                raise AssertionError(
                    f"track ends at frame {fi} with no start event in GoP"
                )
            cand_fi, cand_pos = candidate
            plan.anchor_frames.add(cand_fi)
            plan.decode_frames.add(cand_fi)
            plan.decode_frames.update(
                gop.frames[p].frame_index for p in dependent_frames(gop, cand_pos)
            )
            for tr in ends[fi]:
                tr.anchor_assigned = True
                plan.track_anchors[tr.track_id] = cand_fi
    return plan


def make_report(plans, total_frames) -> SelectionReport:
    decoded = set()
    anchors = set()
    for plan in plans:
        decoded |= plan.decode_frames
        anchors |= plan.anchor_frames
    return SelectionReport(
        total_frames=total_frames,
        decoded_frames=len(decoded),
        anchor_frames=len(anchors),
    )
