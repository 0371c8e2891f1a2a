"""Presence timelines and the disappearance / reappearance scores.

An object's timeline starts at its first non-empty ground-truth frame. Every
maximal run of empty frames after that is a disappearance; non-empty runs
that follow a disappearance are reappearances. Empty frames before the first
appearance belong to no segment.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .masks import Mask
from .metrics import FrameScore

VISIBLE = "visible"
DISAPPEARED = "disappeared"
REAPPEARED = "reappeared"


@dataclass(frozen=True)
class Segment:
    kind: str
    start: int
    end: int  # inclusive

    @property
    def frames(self) -> range:
        return range(self.start, self.end + 1)

    def __len__(self) -> int:
        return self.end - self.start + 1


@dataclass(frozen=True)
class PresenceTimeline:
    object_id: int
    first_visible: int
    segments: tuple[Segment, ...]

    def frames_of(self, kind: str) -> list[int]:
        return [t for seg in self.segments if seg.kind == kind for t in seg.frames]

    def kind_at(self, t: int) -> str | None:
        for seg in self.segments:
            if seg.start <= t <= seg.end:
                return seg.kind
        return None


def timeline_from_presence(presence: Sequence[bool], object_id: int = 0) -> PresenceTimeline:
    """Build the timeline from per-frame visibility flags (frame 1 first)."""
    flags = [bool(p) for p in presence]
    if not any(flags):
        raise ValueError(f"object {object_id} is never visible")
    first = flags.index(True) + 1
    segments: list[Segment] = []
    seen_gap = False
    start = first
    for t in range(first + 1, len(flags) + 2):
        if t <= len(flags) and flags[t - 1] == flags[start - 1]:
            continue
        if flags[start - 1]:
            kind = REAPPEARED if seen_gap else VISIBLE
        else:
            kind = DISAPPEARED
            seen_gap = True
        segments.append(Segment(kind, start, t - 1))
        start = t
    return PresenceTimeline(object_id, first, tuple(segments))


def timeline_segments(gt: Sequence[Mask], object_id: int = 0) -> PresenceTimeline:
    return timeline_from_presence([not m.is_empty() for m in gt], object_id)


def _mean_over(frames: Iterable[int], frame_scores: Mapping[int, FrameScore]) -> float | None:
    vals = [frame_scores[t].jf_dot for t in frames]
    if not vals:
        return None
    return sum(vals) / len(vals)


def disappearance_frames(timeline: PresenceTimeline, eval_frames: Iterable[int] | None = None) -> list[int]:
    frames = timeline.frames_of(DISAPPEARED)
    if eval_frames is not None:
        keep = set(eval_frames)
        frames = [t for t in frames if t in keep]
    return frames


def reappearance_frames(
    timeline: PresenceTimeline,
    window: int | None = None,
    eval_frames: Iterable[int] | None = None,
) -> list[int]:
    """Frames of all reappeared segments, or only the first ``window`` frames of each."""
    if window is not None and window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    frames = []
    for seg in timeline.segments:
        if seg.kind != REAPPEARED:
            continue
        stop = seg.end if window is None else min(seg.end, seg.start + window - 1)
        frames.extend(range(seg.start, stop + 1))
    if eval_frames is not None:
        keep = set(eval_frames)
        frames = [t for t in frames if t in keep]
    return frames


def disappearance_score(
    frame_scores: Mapping[int, FrameScore],
    timeline: PresenceTimeline,
    eval_frames: Iterable[int] | None = None,
) -> float | None:
    """Mean (J + F-dot)/2 over disappeared frames; ``None`` if there are none."""
    return _mean_over(disappearance_frames(timeline, eval_frames), frame_scores)


def reappearance_score(
    frame_scores: Mapping[int, FrameScore],
    timeline: PresenceTimeline,
    window: int | None = None,
    eval_frames: Iterable[int] | None = None,
) -> float | None:
    """Mean (J + F-dot)/2 over reappeared frames; ``None`` if there are none."""
    return _mean_over(reappearance_frames(timeline, window, eval_frames), frame_scores)
