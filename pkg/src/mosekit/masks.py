"""Mask and annotation data model, indexed-PNG I/O and pixel geometry.

Masks are immutable boolean bitmaps indexed ``[row, col]``. Frames are
numbered from 1, so ``annotation.mask(1, k)`` is the given first-frame mask
of object ``k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import DataError


def _frozen_bool(array, name: str) -> np.ndarray:
    arr = np.array(array, dtype=bool)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be at least 1x1, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


class Mask:
    """Binary occupancy bitmap of one object in one frame."""

    __slots__ = ("bits",)

    def __init__(self, bits):
        object.__setattr__(self, "bits", _frozen_bool(bits, "mask"))

    def __setattr__(self, name, value):
        raise AttributeError("Mask is immutable")

    @classmethod
    def empty(cls, height: int, width: int) -> "Mask":
        return cls(np.zeros((height, width), dtype=bool))

    @classmethod
    def full(cls, height: int, width: int) -> "Mask":
        return cls(np.ones((height, width), dtype=bool))

    @classmethod
    def from_box(cls, height: int, width: int, top: int, left: int, h: int, w: int) -> "Mask":
        """Filled ``h`` x ``w`` rectangle with its top-left corner at (top, left), clipped."""
        bits = np.zeros((height, width), dtype=bool)
        bits[max(top, 0):max(top + h, 0), max(left, 0):max(left + w, 0)] = True
        return cls(bits)

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bits.shape

    @property
    def area(self) -> int:
        return int(np.count_nonzero(self.bits))

    def is_empty(self) -> bool:
        return not self.bits.any()

    def __eq__(self, other):
        if not isinstance(other, Mask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and bool(np.array_equal(self.bits, other.bits))

    def __hash__(self):
        return hash((self.bits.shape, self.bits.tobytes()))

    def __repr__(self):
        return f"Mask({self.height}x{self.width}, area={self.area})"


class PixelSet:
    """A set of pixel coordinates inside a fixed ``height`` x ``width`` frame."""

    __slots__ = ("grid",)

    def __init__(self, grid):
        object.__setattr__(self, "grid", _frozen_bool(grid, "pixel set"))

    def __setattr__(self, name, value):
        raise AttributeError("PixelSet is immutable")

    @classmethod
    def from_coords(cls, height: int, width: int, coords: Iterable[tuple[int, int]]) -> "PixelSet":
        grid = np.zeros((height, width), dtype=bool)
        for r, c in coords:
            if not (0 <= r < height and 0 <= c < width):
                raise ValueError(f"coordinate {(r, c)} outside {height}x{width} frame")
            grid[r, c] = True
        return cls(grid)

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    @property
    def members(self) -> frozenset[tuple[int, int]]:
        rows, cols = np.nonzero(self.grid)
        return frozenset(zip(rows.tolist(), cols.tolist()))

    def __len__(self) -> int:
        return int(np.count_nonzero(self.grid))

    def __contains__(self, rc) -> bool:
        r, c = rc
        return 0 <= r < self.height and 0 <= c < self.width and bool(self.grid[r, c])

    def issubset(self, other: "PixelSet") -> bool:
        return self.grid.shape == other.grid.shape and not (self.grid & ~other.grid).any()

    def __eq__(self, other):
        if not isinstance(other, PixelSet):
            return NotImplemented
        return self.grid.shape == other.grid.shape and bool(np.array_equal(self.grid, other.grid))

    def __hash__(self):
        return hash((self.grid.shape, self.grid.tobytes()))

    def __repr__(self):
        return f"PixelSet({self.height}x{self.width}, n={len(self)})"


def mask_area(m: Mask) -> int:
    return m.area


def boundary(m: Mask) -> PixelSet:
    """Object pixels with at least one 4-neighbour that is background or off-image."""
    padded = np.pad(m.bits, 1, mode="constant", constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return PixelSet(m.bits & ~interior)


def dilate(s: PixelSet, radius: float) -> PixelSet:
    """Euclidean-disk dilation: q is kept iff ``dist(q, p) <= radius`` for some p in ``s``."""
    if radius < 0:
        raise ValueError(f"radius must be >= 0, got {radius}")
    if radius == 0 or not s.grid.any():
        return s
    dist = ndimage.distance_transform_edt(~s.grid)
    return PixelSet(dist <= radius)


@dataclass(frozen=True, eq=False)
class VideoAnnotation:
    """Per-frame label maps of one video.

    ``labels[t - 1]`` is the palette-index image of frame ``t``; index 0 is
    background and index ``k`` belongs to object ``k``.
    """

    video_id: str
    labels: np.ndarray
    frame_names: tuple[str, ...] = ()
    object_ids: tuple[int, ...] = field(default=())

    def __post_init__(self):
        labels = np.array(self.labels, dtype=np.uint8)
        if labels.ndim != 3 or labels.shape[0] < 1 or labels.shape[1] < 1 or labels.shape[2] < 1:
            raise ValueError(f"labels must have shape (T, H, W), got {labels.shape}")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        if not self.frame_names:
            width = max(5, len(str(labels.shape[0])))
            names = tuple(f"{i:0{width}d}" for i in range(labels.shape[0]))
            object.__setattr__(self, "frame_names", names)
        elif len(self.frame_names) != labels.shape[0]:
            raise ValueError("frame_names length does not match the number of frames")
        else:
            object.__setattr__(self, "frame_names", tuple(self.frame_names))
        if not self.object_ids:
            ids = np.unique(labels)
            object.__setattr__(self, "object_ids", tuple(int(i) for i in ids if i != 0))
        else:
            object.__setattr__(self, "object_ids", tuple(sorted(int(i) for i in self.object_ids)))

    @property
    def frame_count(self) -> int:
        return self.labels.shape[0]

    @property
    def height(self) -> int:
        return self.labels.shape[1]

    @property
    def width(self) -> int:
        return self.labels.shape[2]

    def mask(self, t: int, object_id: int) -> Mask:
        if not 1 <= t <= self.frame_count:
            raise IndexError(f"frame {t} outside 1..{self.frame_count}")
        return Mask(self.labels[t - 1] == object_id)

    def object_masks(self, object_id: int) -> list[Mask]:
        """Masks of one object for frames 1..T, in order."""
        return [Mask(frame == object_id) for frame in self.labels]

    @cached_property
    def masks(self) -> dict[tuple[int, int], Mask]:
        return {
            (t, k): self.mask(t, k)
            for t in range(1, self.frame_count + 1)
            for k in self.object_ids
        }

    @classmethod
    def from_masks(
        cls,
        video_id: str,
        per_object: dict[int, Sequence[Mask]],
        frame_names: Sequence[str] = (),
    ) -> "VideoAnnotation":
        """Paint per-object mask sequences into label maps; overlaps are rejected."""
        if not per_object:
            raise ValueError("at least one object is required")
        lengths = {len(v) for v in per_object.values()}
        if len(lengths) != 1:
            raise ValueError("all objects need the same number of frames")
        T = lengths.pop()
        shapes = {m.shape for seq in per_object.values() for m in seq}
        if len(shapes) != 1:
            raise ValueError(f"masks have differing shapes: {sorted(shapes)}")
        H, W = shapes.pop()
        labels = np.zeros((T, H, W), dtype=np.uint8)
        for k, seq in sorted(per_object.items()):
            if not 1 <= k <= 255:
                raise ValueError(f"object id {k} outside 1..255")
            for t, m in enumerate(seq):
                if (labels[t][m.bits] != 0).any():
                    raise ValueError(f"object {k} overlaps another object in frame {t + 1}")
                labels[t][m.bits] = k
        return cls(video_id, labels, tuple(frame_names), tuple(sorted(per_object)))


def default_palette() -> list[int]:
    """The usual VOS bit-interleaved colour palette, flattened to 768 ints."""
    palette = []
    for i in range(256):
        r = g = b = 0
        c = i
        for j in range(8):
            r |= ((c >> 0) & 1) << (7 - j)
            g |= ((c >> 1) & 1) << (7 - j)
            b |= ((c >> 2) & 1) << (7 - j)
            c >>= 3
        palette.extend((r, g, b))
    return palette


def read_indexed_png(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            if img.mode != "P":
                raise DataError(f"{path}: expected an indexed-colour (palette) image, got mode {img.mode!r}")
            return np.array(img, dtype=np.uint8)
    except DataError:
        raise
    except OSError as exc:
        raise DataError(f"{path}: cannot read image ({exc})") from exc


def write_indexed_png(path: Path, labels: np.ndarray, palette: list[int] | None = None) -> None:
    img = Image.fromarray(np.asarray(labels, dtype=np.uint8), mode="P")
    img.putpalette(palette or default_palette())
    img.save(path, format="PNG")


def list_mask_files(path: Path) -> list[Path]:
    """PNG files of a video directory, sorted lexicographically by name."""
    return sorted((p for p in Path(path).iterdir() if p.suffix.lower() == ".png"), key=lambda p: p.name)


def load_annotation_dir(path) -> VideoAnnotation:
    """Decode ``<path>/*.png`` palette images into a :class:`VideoAnnotation`.

    Filenames are sorted lexicographically (zero-padded names sort in frame
    order). The video id is the directory name.
    """
    path = Path(path)
    if not path.is_dir():
        raise DataError(f"{path}: annotation directory does not exist")
    files = list_mask_files(path)
    if not files:
        raise DataError(f"{path}: no .png mask files found")
    frames = []
    for f in files:
        labels = read_indexed_png(f)
        if frames and labels.shape != frames[0].shape:
            raise DataError(
                f"{f}: size {labels.shape[1]}x{labels.shape[0]} differs from "
                f"{frames[0].shape[1]}x{frames[0].shape[0]} of {files[0].name}"
            )
        frames.append(labels)
    return VideoAnnotation(path.name, np.stack(frames), tuple(f.stem for f in files))


def save_annotation_dir(annotation: VideoAnnotation, path, palette: list[int] | None = None) -> Path:
    """Write one palette PNG per frame under ``path``; inverse of :func:`load_annotation_dir`."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    for name, labels in zip(annotation.frame_names, annotation.labels):
        write_indexed_png(path / f"{name}.png", labels, palette)
    return path
