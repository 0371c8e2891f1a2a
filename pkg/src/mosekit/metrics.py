"""Per-frame region and contour scores and their per-sequence aggregation.

J is the Jaccard index, F the boundary F-measure at a fixed tolerance tied to
the image diagonal, and F-dot the same boundary F-measure with a tolerance
that scales with the ground-truth object size:

    r = clamp(round(alpha * sqrt(area_gt)), 1, cap)

with ``cap`` defaulting to the fixed F tolerance. This size-adaptive radius is
an approximation of the official adaptive contour measure, whose exact
definition lives with the dataset's own toolkit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .masks import Mask, boundary, dilate

# Column order of the report tables.
COLUMNS = ("JF_dot", "J", "F_dot", "JFd", "JFr", "F", "JF")

BOUND_FRACTION = 0.008
DEFAULT_ALPHA = 0.1


def _check_shapes(gt: Mask, pred: Mask) -> None:
    if gt.shape != pred.shape:
        raise ValueError(f"mask size mismatch: gt {gt.shape} vs pred {pred.shape}")


def region_similarity(gt: Mask, pred: Mask) -> float:
    _check_shapes(gt, pred)
    union = np.count_nonzero(gt.bits | pred.bits)
    if union == 0:
        return 1.0
    return np.count_nonzero(gt.bits & pred.bits) / union


def contour_accuracy(gt: Mask, pred: Mask, radius: float) -> float:
    """Boundary F-measure with matches allowed within ``radius`` pixels."""
    _check_shapes(gt, pred)
    gt_empty, pred_empty = gt.is_empty(), pred.is_empty()
    if gt_empty and pred_empty:
        return 1.0
    if gt_empty or pred_empty:
        return 0.0

    gt_b = boundary(gt)
    pred_b = boundary(pred)
    # Every non-empty mask has a boundary because off-image neighbours count as background.
    assert len(gt_b) and len(pred_b)

    gt_zone = dilate(gt_b, radius).grid
    pred_zone = dilate(pred_b, radius).grid
    precision = np.count_nonzero(pred_b.grid & gt_zone) / len(pred_b)
    recall = np.count_nonzero(gt_b.grid & pred_zone) / len(gt_b)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def fixed_radius(h: int, w: int) -> int:
    if h < 1 or w < 1:
        raise ValueError(f"image size must be positive, got {h}x{w}")
    return max(1, math.ceil(BOUND_FRACTION * math.hypot(h, w)))


def adaptive_radius(area: int, alpha: float, cap: int) -> int:
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    # Round half up; Python's round() would send 0.5 to 0.
    r = math.floor(alpha * math.sqrt(area) + 0.5)
    return min(max(r, 1), cap)


def adaptive_contour_accuracy(gt: Mask, pred: Mask, alpha: float = DEFAULT_ALPHA, cap: int | None = None) -> float:
    _check_shapes(gt, pred)
    if cap is None:
        cap = fixed_radius(*gt.shape)
    return contour_accuracy(gt, pred, adaptive_radius(gt.area, alpha, cap))


@dataclass(frozen=True)
class MetricParams:
    """Tolerance settings; ``cap=None`` means the fixed F radius of the frame."""

    alpha: float = DEFAULT_ALPHA
    cap: int | None = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be > 0, got {self.alpha}")
        if self.cap is not None and self.cap < 1:
            raise ValueError(f"cap must be >= 1, got {self.cap}")


@dataclass(frozen=True)
class FrameScore:
    j: float
    f: float
    f_dot: float

    @property
    def jf_dot(self) -> float:
        return (self.j + self.f_dot) / 2


def frame_score(gt: Mask, pred: Mask, params: MetricParams = MetricParams()) -> FrameScore:
    _check_shapes(gt, pred)
    fixed = fixed_radius(*gt.shape)
    cap = fixed if params.cap is None else params.cap
    return FrameScore(
        j=region_similarity(gt, pred),
        f=contour_accuracy(gt, pred, fixed),
        f_dot=contour_accuracy(gt, pred, adaptive_radius(gt.area, params.alpha, cap)),
    )


@dataclass(frozen=True)
class SequenceReport:
    """Scores of one (video, object) pair.

    ``jf_d`` / ``jf_r`` are ``None`` when the object never disappears /
    reappears; ``n_disappeared`` / ``n_reappeared`` count the frames behind them.
    """

    video_id: str
    object_id: int
    per_frame: dict[int, FrameScore]
    j_mean: float
    f_mean: float
    f_dot_mean: float
    jf_d: float | None = None
    jf_r: float | None = None
    n_disappeared: int = 0
    n_reappeared: int = 0

    @property
    def jf(self) -> float:
        return (self.j_mean + self.f_mean) / 2

    @property
    def jf_dot(self) -> float:
        return (self.j_mean + self.f_dot_mean) / 2

    @property
    def n_frames(self) -> int:
        return len(self.per_frame)

    def columns(self) -> dict[str, float | None]:
        return {
            "JF_dot": self.jf_dot,
            "J": self.j_mean,
            "F_dot": self.f_dot_mean,
            "JFd": self.jf_d,
            "JFr": self.jf_r,
            "F": self.f_mean,
            "JF": self.jf,
        }


def default_eval_frames(frame_count: int) -> list[int]:
    """Frames 2..T; the first frame carries the given annotation."""
    return list(range(2, frame_count + 1))


def aggregate(
    scores: Mapping[int, FrameScore],
    eval_frames: Iterable[int] | None = None,
    video_id: str = "",
    object_id: int = 0,
) -> SequenceReport:
    """Average per-frame scores over ``eval_frames`` (default: every frame but the first)."""
    if eval_frames is None:
        eval_frames = default_eval_frames(max(scores, default=0))
    frames = sorted(set(eval_frames))
    if not frames:
        raise ValueError("eval_frames is empty")
    missing = [t for t in frames if t not in scores]
    if missing:
        raise KeyError(f"no score for frames {missing}")
    chosen = {t: scores[t] for t in frames}
    return SequenceReport(
        video_id=video_id,
        object_id=object_id,
        per_frame=chosen,
        j_mean=float(np.mean([s.j for s in chosen.values()])),
        f_mean=float(np.mean([s.f for s in chosen.values()])),
        f_dot_mean=float(np.mean([s.f_dot for s in chosen.values()])),
    )


def _weighted_mean(values: Sequence[float], weights: Sequence[float]) -> float | None:
    total = sum(weights)
    if not values or total == 0:
        return None
    return float(sum(v * w for v, w in zip(values, weights)) / total)


def dataset_means(reports: Sequence[SequenceReport], mode: str = "object") -> dict[str, float | None]:
    """Dataset-level value for each report column.

    ``mode`` selects the averaging unit: ``"object"`` (every (video, object)
    pair counts once), ``"video"`` (objects are averaged within each video
    first) or ``"frame"`` (pairs weighted by the number of frames behind each
    column). J&F_d and J&F_r only average the pairs where they are defined.
    """
    if mode not in ("object", "video", "frame"):
        raise ValueError(f"unknown aggregation mode {mode!r}")
    if mode == "video":
        by_video: dict[str, list[SequenceReport]] = {}
        for rep in reports:
            by_video.setdefault(rep.video_id, []).append(rep)
        per_video = [dataset_means(reps, "object") for _, reps in sorted(by_video.items())]
        out = {}
        for col in COLUMNS:
            vals = [v[col] for v in per_video if v[col] is not None]
            out[col] = float(np.mean(vals)) if vals else None
        return out

    out = {}
    for col in COLUMNS:
        vals, weights = [], []
        for rep in reports:
            v = rep.columns()[col]
            if v is None:
                continue
            if mode == "frame":
                w = {"JFd": rep.n_disappeared, "JFr": rep.n_reappeared}.get(col, rep.n_frames)
            else:
                w = 1
            vals.append(v)
            weights.append(w)
        out[col] = _weighted_mean(vals, weights)
    return out
