import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

sys.path.insert(0, str(Path(__file__).parent))

from mosekit.masks import Mask, VideoAnnotation, save_annotation_dir  # noqa: E402


def square(h, w, top, left, size):
    return Mask.from_box(h, w, top, left, size, size)


def presence_video(pattern, size=32, box=(8, 8, 10), video_id="v", object_id=1):
    """Single-object video whose mask is a fixed box on frames flagged 1, empty elsewhere."""
    top, left, side = box
    masks = [square(size, size, top, left, side) if p else Mask.empty(size, size) for p in pattern]
    return VideoAnnotation.from_masks(video_id, {object_id: masks})


def write_dataset(root, videos):
    root = Path(root)
    for ann in videos:
        save_annotation_dir(ann, root / ann.video_id)
    return root


def solid_frame(rgb, size=16):
    return np.tile(np.array(rgb, dtype=np.uint8), (size, size, 1))


def write_frames(root, video_id, frames):
    d = Path(root) / video_id
    d.mkdir(parents=True, exist_ok=True)
    for i, f in enumerate(frames):
        Image.fromarray(f).save(d / f"{i:05d}.png")
    return d


def mini_dataset(tmp_path):
    """Three videos covering steady presence, a disappearance/reappearance and two objects."""
    size = 32
    v1 = presence_video([1, 1, 1, 1, 1], size, video_id="alpha")
    v2 = presence_video([1, 1, 0, 0, 1, 1], size, box=(4, 6, 9), video_id="bravo")
    masks_a = [square(size, size, 2, 2, 6 + t) for t in range(4)]
    masks_b = [Mask.from_box(size, size, 20, 18, 5, 8) if t != 2 else Mask.empty(size, size) for t in range(4)]
    v3 = VideoAnnotation.from_masks("charlie", {1: masks_a, 3: masks_b})
    return [v1, v2, v3]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance reporting ---------------------------------------------------------

import time  # noqa: E402

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []
SUITE_BUDGET_S = 120.0
_session_start = time.perf_counter()


def pytest_sessionstart(session):
    global _session_start
    _session_start = time.perf_counter()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    elapsed = time.perf_counter() - _session_start
    if not ACCEPTANCE_RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name, ok, detail in sorted(ACCEPTANCE_RESULTS):
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  {name}  {detail}")
    ok = elapsed < SUITE_BUDGET_S
    tr.write_line(f"{'PASS' if ok else 'FAIL'}  AC9 suite runtime  {elapsed:.1f}s (budget {SUITE_BUDGET_S:.0f}s)")


def pytest_sessionfinish(session, exitstatus):
    if ACCEPTANCE_RESULTS and time.perf_counter() - _session_start >= SUITE_BUDGET_S:
        session.exitstatus = 1
