"""HSV histograms, Bhattacharyya distance and the scene-change gate.

The gate decides, frame by frame, whether concept-aware memory runs. A frame
is active when its histogram distance to a reference frame reaches the
threshold. Threshold 0 activates every frame after the first and threshold 1
disables the gate entirely, whatever the distance.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image

from .errors import DataError

DEFAULT_BINS = (8, 8, 8)
DEFAULT_THRESHOLD = 0.35
ANCHOR_MODES = ("previous", "anchored")
FRAME_SUFFIXES = (".jpg", ".jpeg", ".png", ".bmp")


def rgb_to_hsv(rgb: np.ndarray) -> np.ndarray:
    """Convert an ``(..., 3)`` RGB array to HSV with H in [0, 360) and S, V in [0, 1].

    Integer input is taken as 8-bit; float input as already in [0, 1].
    """
    rgb = np.asarray(rgb)
    if rgb.shape[-1] != 3:
        raise ValueError(f"expected trailing RGB axis of size 3, got shape {rgb.shape}")
    if np.issubdtype(rgb.dtype, np.integer):
        rgb = rgb.astype(np.float64) / 255.0
    else:
        rgb = rgb.astype(np.float64)
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = rgb.max(axis=-1)
    minc = rgb.min(axis=-1)
    delta = maxc - minc
    v = maxc
    s = np.divide(delta, maxc, out=np.zeros_like(maxc), where=maxc > 0)

    safe = np.where(delta > 0, delta, 1.0)
    rc = (maxc - r) / safe
    gc = (maxc - g) / safe
    bc = (maxc - b) / safe
    h = np.where(r == maxc, bc - gc, np.where(g == maxc, 2.0 + rc - bc, 4.0 + gc - rc))
    h = np.where(delta > 0, (h / 6.0) % 1.0, 0.0) * 360.0
    # (x % 1.0) can round up to exactly 1.0 for tiny negative x.
    h = np.where(h >= 360.0, 0.0, h)
    return np.stack([h, s, v], axis=-1)


@dataclass(frozen=True, eq=False)
class Histogram:
    """Joint HSV histogram normalised to total mass 1."""

    bins: tuple[int, int, int]
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != tuple(self.bins):
            raise ValueError(f"weights shape {w.shape} does not match bins {self.bins}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def _check_bins(bins: Sequence[int]) -> tuple[int, int, int]:
    bins = tuple(int(b) for b in bins)
    if len(bins) != 3 or min(bins) < 1:
        raise ValueError(f"bins must be three positive counts, got {bins}")
    return bins


def hsv_histogram(frame: np.ndarray, bins: Sequence[int] = DEFAULT_BINS) -> Histogram:
    """Joint HSV histogram of an ``(H, W, 3)`` RGB image, normalised by pixel count."""
    bins = _check_bins(bins)
    frame = np.asarray(frame)
    if frame.ndim != 3 or frame.shape[-1] != 3:
        raise ValueError(f"expected an (H, W, 3) RGB image, got shape {frame.shape}")
    n = frame.shape[0] * frame.shape[1]
    if n == 0:
        raise ValueError("image has no pixels")
    hsv = rgb_to_hsv(frame).reshape(-1, 3)
    nh, ns, nv = bins
    hi = np.minimum((hsv[:, 0] / 360.0 * nh).astype(np.int64), nh - 1)
    si = np.minimum((hsv[:, 1] * ns).astype(np.int64), ns - 1)
    vi = np.minimum((hsv[:, 2] * nv).astype(np.int64), nv - 1)
    flat = (hi * ns + si) * nv + vi
    counts = np.bincount(flat, minlength=nh * ns * nv).astype(np.float64)
    return Histogram(bins, (counts / n).reshape(bins))


def bhattacharyya(p, q) -> float:
    """``sqrt(1 - sum(sqrt(p * q)))`` clamped to [0, 1]; accepts histograms or arrays.

    For normalised inputs ``1 - sum(sqrt(p * q))`` equals
    ``sum((sqrt(p) - sqrt(q))**2) / 2``; the latter is used because it is
    exactly 0 for ``p == q`` instead of ``sqrt`` of the rounding error in ``sum(p)``.
    """
    pw = p.weights if isinstance(p, Histogram) else np.asarray(p, dtype=np.float64)
    qw = q.weights if isinstance(q, Histogram) else np.asarray(q, dtype=np.float64)
    if pw.shape != qw.shape:
        raise ValueError(f"histogram shapes differ: {pw.shape} vs {qw.shape}")
    half_sq = 0.5 * float(np.sum((np.sqrt(pw) - np.sqrt(qw)) ** 2))
    return math.sqrt(min(1.0, max(0.0, half_sq)))


def gate_decision(distance: float, threshold: float) -> bool:
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    if threshold == 0.0:
        return True
    if threshold == 1.0:
        return False
    return distance >= threshold


@dataclass(frozen=True)
class GateStep:
    t: int
    distance: float
    active: bool
    anchor: int  # reference frame the distance was measured against


@dataclass(frozen=True)
class GateTrace:
    threshold: float
    anchor_mode: str
    steps: tuple[GateStep, ...]

    def __len__(self) -> int:
        return len(self.steps)

    def active(self, t: int) -> bool:
        return self.steps[t - 1].active

    @property
    def active_frames(self) -> list[int]:
        return [s.t for s in self.steps if s.active]

    def to_json(self) -> str:
        doc = {
            "threshold": self.threshold,
            "anchor_mode": self.anchor_mode,
            "frames": [asdict(s) for s in self.steps],
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "GateTrace":
        doc = json.loads(text)
        frames = doc["frames"] if isinstance(doc, dict) else doc
        steps = tuple(
            GateStep(int(f["t"]), float(f["distance"]), bool(f["active"]), int(f["anchor"])) for f in frames
        )
        if [s.t for s in steps] != list(range(1, len(steps) + 1)):
            raise DataError("gate trace frames must be numbered 1..T without gaps")
        if isinstance(doc, dict):
            return cls(float(doc.get("threshold", math.nan)), doc.get("anchor_mode", "previous"), steps)
        return cls(math.nan, "previous", steps)

    @classmethod
    def from_flags(cls, flags: Sequence[bool]) -> "GateTrace":
        """Trace with given activation flags (frame 1 is forced inactive); distances unknown."""
        steps = tuple(
            GateStep(t, math.nan, bool(a) and t >= 2, max(t - 1, 1)) for t, a in enumerate(flags, start=1)
        )
        return cls(math.nan, "previous", steps)


def gate_trace_from_histograms(
    hists: Sequence[Histogram],
    threshold: float = DEFAULT_THRESHOLD,
    anchor_mode: str = "previous",
) -> GateTrace:
    """Fold the gate over per-frame histograms.

    ``"previous"`` compares frame t with t-1; ``"anchored"`` compares it with the
    last active frame (frame 1 initially).
    """
    if anchor_mode not in ANCHOR_MODES:
        raise ValueError(f"anchor_mode must be one of {ANCHOR_MODES}, got {anchor_mode!r}")
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {threshold}")
    if not hists:
        raise ValueError("need at least one frame")
    steps = [GateStep(1, 0.0, False, 1)]
    anchor = 1
    for t in range(2, len(hists) + 1):
        ref = t - 1 if anchor_mode == "previous" else anchor
        d = bhattacharyya(hists[t - 1], hists[ref - 1])
        active = gate_decision(d, threshold)
        steps.append(GateStep(t, d, active, ref))
        if active and anchor_mode == "anchored":
            anchor = t
    return GateTrace(threshold, anchor_mode, tuple(steps))


def gate_trace(
    frames: Iterable[np.ndarray],
    threshold: float = DEFAULT_THRESHOLD,
    anchor_mode: str = "previous",
    bins: Sequence[int] = DEFAULT_BINS,
) -> GateTrace:
    hists = [hsv_histogram(f, bins) for f in frames]
    return gate_trace_from_histograms(hists, threshold, anchor_mode)


def list_frame_files(path) -> list[Path]:
    path = Path(path)
    if not path.is_dir():
        raise DataError(f"{path}: frame directory does not exist")
    files = sorted((p for p in path.iterdir() if p.suffix.lower() in FRAME_SUFFIXES), key=lambda p: p.name)
    if not files:
        raise DataError(f"{path}: no frame images found")
    return files


def read_frame(path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.array(img.convert("RGB"))
    except OSError as exc:
        raise DataError(f"{path}: cannot read frame ({exc})") from exc


def load_frame_histograms(path, bins: Sequence[int] = DEFAULT_BINS) -> list[Histogram]:
    """Histograms of every frame image in a directory, in lexicographic file order."""
    return [hsv_histogram(read_frame(f), bins) for f in list_frame_files(path)]
