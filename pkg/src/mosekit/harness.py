"""Dataset evaluation, ablation grids and report files.

Layout: ``<gt_root>/<video>/<frame>.png`` palette masks, predictions under
``<pred_root>`` with the same names, optional RGB frames under
``<frames_root>/<video>/``. Results are always assembled in sorted
(video, object) order, so files do not depend on the worker count.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from .errors import ConfigError, DataError
from .masks import Mask, VideoAnnotation, list_mask_files, load_annotation_dir, read_indexed_png
from .memory_bank import DEFAULT_NC, DEFAULT_NL, PUSH_POLICIES, simulate
from .metrics import COLUMNS, MetricParams, SequenceReport, aggregate, dataset_means, frame_score
from .scene_gate import ANCHOR_MODES, DEFAULT_BINS, DEFAULT_THRESHOLD, gate_trace_from_histograms, load_frame_histograms
from .temporal import disappearance_frames, reappearance_frames, timeline_segments

log = logging.getLogger(__name__)

WORKERS_ENV = "MOSEKIT_WORKERS"
CSV_HEADER = ("name",) + COLUMNS
DATASET_ROW = "dataset"
GRID_PARAMS = ("nl", "threshold")

NOTES = (
    "F_dot uses radius clamp(round(alpha*sqrt(area_gt)), 1, cap), an approximation of the official adaptive contour measure.",
    "J&F_d scores frames with empty ground truth after the first appearance; J&F_r scores frames after each reappearance.",
)


def default_workers() -> int:
    value = os.environ.get(WORKERS_ENV)
    if not value:
        return 1
    try:
        n = int(value)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {value!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be >= 1, got {n}")
    return n


@dataclass(frozen=True)
class EvalConfig:
    gt_root: Path
    pred_root: Path | str | None = None
    frames_root: Path | None = None
    alpha: float = 0.1
    cap: int | None = None
    bins: tuple[int, int, int] = DEFAULT_BINS
    threshold: float = DEFAULT_THRESHOLD
    anchor_mode: str = "previous"
    nl: int = DEFAULT_NL
    nc: int = DEFAULT_NC
    push_policy: str = "on-activation"
    eval_frames: str = "skip-first"
    reappear_window: int | None = None
    aggregation: str = "object"
    strict: bool = False
    workers: int | None = None

    def validate(self, need_pred: bool = True) -> "EvalConfig":
        if not Path(self.gt_root).is_dir():
            raise ConfigError(f"ground-truth root {self.gt_root} does not exist")
        if need_pred and self.pred_root is None:
            raise ConfigError("a prediction root is required")
        if self.frames_root is not None and not Path(self.frames_root).is_dir():
            raise ConfigError(f"frames root {self.frames_root} does not exist")
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if self.cap is not None and self.cap < 1:
            raise ConfigError(f"cap must be >= 1, got {self.cap}")
        if not 0.0 <= self.threshold <= 1.0:
            raise ConfigError(f"threshold must lie in [0, 1], got {self.threshold}")
        if len(self.bins) != 3 or min(self.bins) < 1:
            raise ConfigError(f"bins must be three positive counts, got {self.bins}")
        if self.anchor_mode not in ANCHOR_MODES:
            raise ConfigError(f"anchor mode must be one of {ANCHOR_MODES}")
        if self.push_policy not in PUSH_POLICIES:
            raise ConfigError(f"push policy must be one of {PUSH_POLICIES}")
        if self.nl < 2 or self.nc < 1:
            raise ConfigError(f"need nl >= 2 and nc >= 1, got nl={self.nl}, nc={self.nc}")
        if self.eval_frames not in ("skip-first", "all"):
            raise ConfigError(f"eval frames policy must be 'skip-first' or 'all', got {self.eval_frames!r}")
        if self.reappear_window is not None and self.reappear_window < 1:
            raise ConfigError("reappear window must be >= 1")
        if self.aggregation not in ("object", "video", "frame"):
            raise ConfigError(f"unknown aggregation {self.aggregation!r}")
        if self.workers is not None and self.workers < 1:
            raise ConfigError("workers must be >= 1")
        return self

    def echo(self) -> dict:
        """Settings that affect scores; worker count is left out on purpose."""
        d = asdict(self)
        d.pop("workers")
        for key in ("gt_root", "pred_root", "frames_root"):
            if d[key] is not None:
                d[key] = str(d[key])
        d["bins"] = list(self.bins)
        return d


@dataclass
class DatasetReport:
    sequences: list[SequenceReport]
    means: dict[str, float | None]
    config: dict
    warnings: list[str] = field(default_factory=list)
    version: str = __version__


# -- evaluation ------------------------------------------------------------


def _eval_frame_list(frame_count: int, policy: str) -> list[int]:
    start = 2 if policy == "skip-first" and frame_count > 1 else 1
    return list(range(start, frame_count + 1))


def load_prediction(gt: VideoAnnotation, pred_dir: Path, strict: bool) -> tuple[np.ndarray, list[str]]:
    """Prediction label maps aligned to the GT frame names; gaps become empty frames."""
    warnings = []
    labels = np.zeros_like(gt.labels)
    if not pred_dir.is_dir():
        msg = f"{gt.video_id}: prediction directory missing, scoring all frames as empty"
        if strict:
            raise DataError(msg)
        return labels, [msg]
    names = set(gt.frame_names)
    extra = sorted(p.name for p in list_mask_files(pred_dir) if p.stem not in names)
    if extra:
        warnings.append(f"{gt.video_id}: ignoring prediction files with no ground-truth frame: {', '.join(extra)}")
    for i, name in enumerate(gt.frame_names):
        f = pred_dir / f"{name}.png"
        if not f.exists():
            msg = f"{gt.video_id}: prediction frame {name} missing, scored as empty"
            if strict:
                raise DataError(msg)
            warnings.append(msg)
            continue
        frame = read_indexed_png(f)
        if frame.shape != gt.labels.shape[1:]:
            raise DataError(f"{f}: size {frame.shape[1]}x{frame.shape[0]} differs from ground truth")
        labels[i] = frame
    unknown = sorted(set(np.unique(labels).tolist()) - {0} - set(gt.object_ids))
    if unknown:
        raise DataError(f"{gt.video_id}: prediction contains object ids {unknown} absent from ground truth")
    return labels, warnings


def evaluate_sequences(
    gt: VideoAnnotation,
    pred_labels: np.ndarray,
    params: MetricParams = MetricParams(),
    eval_policy: str = "skip-first",
    reappear_window: int | None = None,
) -> list[SequenceReport]:
    frames = _eval_frame_list(gt.frame_count, eval_policy)
    reports = []
    for k in gt.object_ids:
        gt_masks = gt.object_masks(k)
        scores = {t: frame_score(gt_masks[t - 1], Mask(pred_labels[t - 1] == k), params) for t in frames}
        rep = aggregate(scores, frames, gt.video_id, k)
        jf_d = jf_r = None
        n_d = n_r = 0
        if any(not m.is_empty() for m in gt_masks):
            timeline = timeline_segments(gt_masks, k)
            d_frames = disappearance_frames(timeline, frames)
            r_frames = reappearance_frames(timeline, reappear_window, frames)
            n_d, n_r = len(d_frames), len(r_frames)
            if d_frames:
                jf_d = sum(scores[t].jf_dot for t in d_frames) / n_d
            if r_frames:
                jf_r = sum(scores[t].jf_dot for t in r_frames) / n_r
        reports.append(replace(rep, jf_d=jf_d, jf_r=jf_r, n_disappeared=n_d, n_reappeared=n_r))
    return reports


def _evaluate_video(args) -> tuple[list[SequenceReport], list[str]]:
    gt_dir, pred_root, cfg = args
    gt = load_annotation_dir(gt_dir)
    if not gt.object_ids:
        return [], [f"{gt.video_id}: ground truth has no objects, skipped"]
    labels, warnings = load_prediction(gt, Path(pred_root) / gt.video_id, cfg.strict)
    params = MetricParams(cfg.alpha, cfg.cap)
    return evaluate_sequences(gt, labels, params, cfg.eval_frames, cfg.reappear_window), warnings


def list_videos(root: Path) -> list[Path]:
    root = Path(root)
    videos = sorted((p for p in root.iterdir() if p.is_dir()), key=lambda p: p.name)
    if not videos:
        raise DataError(f"{root}: no video directories found")
    return videos


def _map(fn, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def run_evaluation(cfg: EvalConfig, pred_root: Path | str | None = None) -> DatasetReport:
    cfg.validate()
    pred_root = Path(pred_root if pred_root is not None else cfg.pred_root)
    if not pred_root.is_dir():
        raise DataError(f"prediction root {pred_root} does not exist")
    videos = list_videos(cfg.gt_root)
    gt_ids = {v.name for v in videos}
    stray = sorted(p.name for p in pred_root.iterdir() if p.is_dir() and p.name not in gt_ids)
    if stray:
        raise DataError(f"prediction videos absent from ground truth: {', '.join(stray)}")

    workers = cfg.workers or default_workers()
    results = _map(_evaluate_video, [(v, pred_root, cfg) for v in videos], workers)

    sequences: list[SequenceReport] = []
    warnings: list[str] = []
    for reps, warns in results:
        sequences.extend(reps)
        warnings.extend(warns)
    for w in warnings:
        log.warning(w)
    if not sequences:
        raise DataError("no (video, object) pairs to evaluate")
    echo = cfg.echo()
    echo["pred_root"] = str(pred_root)
    return DatasetReport(sequences, dataset_means(sequences, cfg.aggregation), echo, warnings)


# -- report files ------------------------------------------------------------


def format_score(value: float | None) -> str:
    return "-" if value is None else f"{value * 100:.2f}"


def sequence_name(rep: SequenceReport) -> str:
    return f"{rep.video_id}_{rep.object_id}"


def report_to_dict(report: DatasetReport) -> dict:
    return {
        "tool": "mosekit",
        "version": report.version,
        "notes": list(NOTES),
        "config": report.config,
        "columns": list(COLUMNS),
        "dataset": report.means,
        "sequences": [
            {
                "video": rep.video_id,
                "object": rep.object_id,
                **rep.columns(),
                "n_frames": rep.n_frames,
                "n_disappeared": rep.n_disappeared,
                "n_reappeared": rep.n_reappeared,
                "per_frame": [
                    {"t": t, "j": s.j, "f": s.f, "f_dot": s.f_dot} for t, s in sorted(rep.per_frame.items())
                ],
            }
            for rep in report.sequences
        ],
        "warnings": list(report.warnings),
    }


def report_to_csv(report: DatasetReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for rep in report.sequences:
        cols = rep.columns()
        writer.writerow([sequence_name(rep)] + [format_score(cols[c]) for c in COLUMNS])
    writer.writerow([DATASET_ROW] + [format_score(report.means[c]) for c in COLUMNS])
    return buf.getvalue()


def _write(path: Path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc
    return path


def emit_report(report: DatasetReport, path, fmt: str) -> Path:
    if fmt == "json":
        return _write(path, json.dumps(report_to_dict(report), indent=2) + "\n")
    if fmt == "csv":
        return _write(path, report_to_csv(report))
    raise ConfigError(f"unknown report format {fmt!r}")


# -- ablation grid ------------------------------------------------------------


def threshold_label(value: float) -> str:
    if value == 0:
        return "0 (all w/ C)"
    if value == 1:
        return "1 (w/o C)"
    return f"{value:g}"


def point_label(point: Mapping[str, float]) -> str:
    parts = []
    for key, value in point.items():
        parts.append(threshold_label(value) if key == "threshold" else f"{value:g}")
    return ", ".join(parts)


@dataclass
class AblationRow:
    label: str
    point: dict
    report: DatasetReport | None
    memory: dict | None = None


@dataclass
class AblationTable:
    params: tuple[str, ...]
    rows: list[AblationRow]

    @property
    def label_header(self) -> str:
        if self.params == ("nl",):
            return "Memory Size"
        if self.params == ("threshold",):
            return "Threshold"
        return "Setting"


def _check_grid(grid: Mapping[str, Sequence[float]]) -> dict[str, list]:
    if not grid or not any(len(v) for v in grid.values()):
        raise ConfigError("ablation grid is empty")
    out = {}
    for key, values in grid.items():
        if key not in GRID_PARAMS:
            raise ConfigError(f"unsupported grid parameter {key!r}; choose from {GRID_PARAMS}")
        values = list(values)
        if not values:
            raise ConfigError(f"grid parameter {key!r} has no values")
        if key == "nl":
            if any(int(v) != v or v < 2 for v in values):
                raise ConfigError(f"nl values must be integers >= 2, got {values}")
            values = [int(v) for v in values]
        if key == "threshold" and any(not 0 <= v <= 1 for v in values):
            raise ConfigError(f"threshold values must lie in [0, 1], got {values}")
        out[key] = values
    return out


def _memory_summary(hists: dict[str, list], frame_counts: dict[str, int], cfg: EvalConfig) -> dict:
    active, concept, grounding = [], [], []
    for vid in sorted(hists):
        gate = gate_trace_from_histograms(hists[vid], cfg.threshold, cfg.anchor_mode)
        trace = simulate(frame_counts[vid], cfg.nl, cfg.nc, gate, cfg.push_policy)
        later = trace.snapshots[1:]
        if later:
            active.append(np.mean([s.active for s in later]))
            grounding.append(np.mean([len(s.grounding) for s in later]))
        concept.append(np.mean([len(s.concept) for s in trace.snapshots]))
    return {
        "gate_active_fraction": float(np.mean(active)) if active else 0.0,
        "mean_concept_size": float(np.mean(concept)),
        "mean_grounding_size": float(np.mean(grounding)) if grounding else 0.0,
    }


def run_ablation_grid(
    cfg: EvalConfig,
    grid: Mapping[str, Sequence[float]],
    memory_traces: bool = False,
) -> AblationTable:
    """Evaluate (and optionally simulate memory for) every point of the grid.

    ``pred_root`` may hold ``{nl}`` / ``{threshold}`` placeholders to pick a
    prediction directory per point; without placeholders every point scores
    the same predictions. Memory summaries need ``frames_root``.
    """
    grid = _check_grid(grid)
    if memory_traces and cfg.frames_root is None:
        raise ConfigError("memory traces need a frames root")
    if cfg.pred_root is None and not memory_traces:
        raise ConfigError("ablation needs a prediction root, memory traces, or both")
    cfg.validate(need_pred=False)

    hists: dict[str, list] = {}
    frame_counts: dict[str, int] = {}
    if memory_traces:
        for v in list_videos(cfg.gt_root):
            n = len(list_mask_files(v))
            frames_dir = Path(cfg.frames_root) / v.name
            hists[v.name] = load_frame_histograms(frames_dir, cfg.bins)
            if len(hists[v.name]) != n:
                raise DataError(f"{frames_dir}: {len(hists[v.name])} frames but {n} annotation frames")
            frame_counts[v.name] = n

    keys = tuple(grid)
    rows = []
    cache: dict[str, DatasetReport] = {}
    for values in itertools.product(*(grid[k] for k in keys)):
        point = dict(zip(keys, values))
        point_cfg = replace(cfg, **point)
        report = None
        if cfg.pred_root is not None:
            pred = str(cfg.pred_root).format(**{k: f"{v:g}" for k, v in point.items()})
            if pred not in cache:
                cache[pred] = run_evaluation(point_cfg, pred)
            report = cache[pred]
        memory = _memory_summary(hists, frame_counts, point_cfg) if memory_traces else None
        rows.append(AblationRow(point_label(point), point, report, memory))
    return AblationTable(keys, rows)


MEMORY_COLUMNS = ("gate_active_fraction", "mean_concept_size", "mean_grounding_size")


def ablation_to_csv(table: AblationTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    has_scores = any(r.report is not None for r in table.rows)
    has_memory = any(r.memory is not None for r in table.rows)
    header = [table.label_header]
    if has_scores:
        header += list(COLUMNS)
    if has_memory:
        header += list(MEMORY_COLUMNS)
    writer.writerow(header)
    for row in table.rows:
        line = [row.label]
        if has_scores:
            line += [format_score(row.report.means[c]) for c in COLUMNS]
        if has_memory:
            line += [f"{row.memory[c]:.4f}" for c in MEMORY_COLUMNS]
        writer.writerow(line)
    return buf.getvalue()


def ablation_to_dict(table: AblationTable) -> dict:
    return {
        "tool": "mosekit",
        "version": __version__,
        "params": list(table.params),
        "columns": list(COLUMNS),
        "rows": [
            {
                "label": row.label,
                "point": row.point,
                "dataset": None if row.report is None else row.report.means,
                "warnings": [] if row.report is None else row.report.warnings,
                "memory": row.memory,
            }
            for row in table.rows
        ],
    }


def emit_ablation(table: AblationTable, path, fmt: str) -> Path:
    if fmt == "json":
        return _write(path, json.dumps(ablation_to_dict(table), indent=2) + "\n")
    if fmt == "csv":
        return _write(path, ablation_to_csv(table))
    raise ConfigError(f"unknown report format {fmt!r}")
