import pytest
from hypothesis import given, strategies as st

from conftest import presence_video
from mosekit.metrics import FrameScore, frame_score
from mosekit.masks import Mask
from mosekit.temporal import (
    DISAPPEARED,
    REAPPEARED,
    VISIBLE,
    Segment,
    disappearance_score,
    reappearance_score,
    timeline_from_presence,
    timeline_segments,
)

PERFECT = FrameScore(1.0, 1.0, 1.0)
ZERO = FrameScore(0.0, 0.0, 0.0)


def test_always_visible():
    tl = timeline_from_presence([1, 1, 1, 1])
    assert tl.first_visible == 1
    assert tl.segments == (Segment(VISIBLE, 1, 4),)


def test_disappear_then_reappear():
    tl = timeline_from_presence([1, 1, 0, 0, 1, 1])
    assert tl.segments == (Segment(VISIBLE, 1, 2), Segment(DISAPPEARED, 3, 4), Segment(REAPPEARED, 5, 6))


def test_leading_absence_is_not_disappearance():
    tl = timeline_from_presence([0, 0, 1, 1])
    assert tl.first_visible == 3
    assert tl.segments == (Segment(VISIBLE, 3, 4),)


def test_trailing_disappearance_and_multiple_gaps():
    tl = timeline_from_presence([1, 0, 1, 0, 0, 1, 0])
    kinds = [(s.kind, s.start, s.end) for s in tl.segments]
    assert kinds == [
        (VISIBLE, 1, 1),
        (DISAPPEARED, 2, 2),
        (REAPPEARED, 3, 3),
        (DISAPPEARED, 4, 5),
        (REAPPEARED, 6, 6),
        (DISAPPEARED, 7, 7),
    ]


def test_never_visible():
    with pytest.raises(ValueError):
        timeline_from_presence([0, 0, 0])


def test_timeline_from_masks():
    ann = presence_video([0, 1, 0, 1])
    tl = timeline_segments(ann.object_masks(1), 1)
    assert tl.object_id == 1
    assert tl.first_visible == 2
    assert [s.kind for s in tl.segments] == [VISIBLE, DISAPPEARED, REAPPEARED]


@given(st.lists(st.booleans(), min_size=1, max_size=40).filter(any))
def test_timeline_partition_properties(flags):
    tl = timeline_from_presence(flags)
    covered = [t for s in tl.segments for t in s.frames]
    assert covered == list(range(tl.first_visible, len(flags) + 1))
    prev = None
    for s in tl.segments:
        for t in s.frames:
            assert flags[t - 1] == (s.kind != DISAPPEARED)
        if s.kind == REAPPEARED:
            assert prev == DISAPPEARED
        assert s.kind != prev  # maximal runs
        prev = s.kind


def test_disappearance_all_empty_predictions():
    tl = timeline_from_presence([1, 1, 0, 0, 1, 1])
    scores = {t: PERFECT for t in range(1, 7)}
    assert disappearance_score(scores, tl) == 1.0


def test_disappearance_half_wrong():
    tl = timeline_from_presence([1, 1, 0, 0, 1, 1])
    scores = {t: PERFECT for t in range(1, 7)}
    scores[4] = ZERO
    assert disappearance_score(scores, tl) == 0.5


def test_no_disappearance_absent():
    tl = timeline_from_presence([1, 1, 1])
    scores = {t: PERFECT for t in range(1, 4)}
    assert disappearance_score(scores, tl) is None
    assert reappearance_score(scores, tl) is None


def test_reappearance_perfect():
    tl = timeline_from_presence([1, 1, 0, 0, 1, 1])
    scores = {t: PERFECT for t in range(1, 7)}
    assert reappearance_score(scores, tl) == 1.0


def test_reappearance_single_frame():
    ann = presence_video([1, 0, 1])
    gt = ann.object_masks(1)
    pred = [gt[0], Mask.empty(*gt[0].shape), gt[2]]
    scores = {t: frame_score(gt[t - 1], pred[t - 1]) for t in (1, 2, 3)}
    tl = timeline_segments(gt)
    assert reappearance_score(scores, tl) == scores[3].jf_dot == 1.0


def test_reappearance_window():
    tl = timeline_from_presence([1, 0, 1, 1, 1])
    scores = {1: PERFECT, 2: PERFECT, 3: PERFECT, 4: ZERO, 5: ZERO}
    assert reappearance_score(scores, tl) == pytest.approx(1 / 3)
    assert reappearance_score(scores, tl, window=1) == 1.0
    with pytest.raises(ValueError):
        reappearance_score(scores, tl, window=0)


def test_eval_frame_restriction():
    tl = timeline_from_presence([1, 0, 0, 1])
    scores = {t: PERFECT for t in range(1, 5)}
    scores[2] = ZERO
    assert disappearance_score(scores, tl, eval_frames=[3, 4]) == 1.0


@given(st.lists(st.booleans(), min_size=2, max_size=30).filter(any))
def test_ground_truth_predictions_score_one(flags):
    ann = presence_video([int(f) for f in flags], size=16, box=(3, 3, 5))
    gt = ann.object_masks(1)
    scores = {t: frame_score(m, m) for t, m in enumerate(gt, start=1)}
    tl = timeline_segments(gt)
    for value in (disappearance_score(scores, tl), reappearance_score(scores, tl)):
        assert value is None or value == 1.0
