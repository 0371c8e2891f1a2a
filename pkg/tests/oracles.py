"""Brute-force reference computations used as independent test oracles.

Nothing here calls into the package's numeric paths: pixels are visited one
by one, distances are compared pairwise, queues are replayed with lists.
"""

import colorsys
import math


def pixels(bits):
    return [(r, c) for r, row in enumerate(bits) for c, v in enumerate(row) if v]


def iou(a, b):
    inter = union = 0
    for ra, rb in zip(a, b):
        for x, y in zip(ra, rb):
            inter += bool(x) and bool(y)
            union += bool(x) or bool(y)
    return 1.0 if union == 0 else inter / union


def boundary(bits):
    h, w = len(bits), len(bits[0])
    out = set()
    for r, c in pixels(bits):
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            rr, cc = r + dr, c + dc
            if not (0 <= rr < h and 0 <= cc < w) or not bits[rr][cc]:
                out.add((r, c))
                break
    return out


def dilate(points, radius, h, w):
    return {
        (r, c)
        for r in range(h)
        for c in range(w)
        if any((r - pr) ** 2 + (c - pc) ** 2 <= radius * radius for pr, pc in points)
    }


def _matched(src, dst, radius):
    r2 = radius * radius
    return sum(1 for (r, c) in src if any((r - a) ** 2 + (c - b) ** 2 <= r2 for a, b in dst))


def contour_f(gt, pred, radius):
    gt_any = any(any(row) for row in gt)
    pred_any = any(any(row) for row in pred)
    if not gt_any and not pred_any:
        return 1.0
    if not gt_any or not pred_any:
        return 0.0
    bg, bp = boundary(gt), boundary(pred)
    precision = _matched(bp, bg, radius) / len(bp)
    recall = _matched(bg, bp, radius) / len(bg)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def contour_f_fast(gt, pred, radius):
    """Same oracle with numpy pairwise distances; used where 1000s of pairs are checked."""
    import numpy as np

    gt, pred = np.asarray(gt, bool), np.asarray(pred, bool)
    if not gt.any() and not pred.any():
        return 1.0
    if not gt.any() or not pred.any():
        return 0.0
    bg = np.array(sorted(boundary(gt.tolist())))
    bp = np.array(sorted(boundary(pred.tolist())))
    d2 = ((bp[:, None, :] - bg[None, :, :]) ** 2).sum(-1)
    close = d2 <= radius * radius
    precision = close.any(axis=1).sum() / len(bp)
    recall = close.any(axis=0).sum() / len(bg)
    if precision + recall == 0:
        return 0.0
    return float(2 * precision * recall / (precision + recall))


def fifo_replay(capacity, pushes):
    queue, evicted = [], []
    for f in pushes:
        queue.append(f)
        if len(queue) > capacity:
            evicted.append(queue.pop(0))
    return queue, evicted


def hsv_pixel(r, g, b):
    h, s, v = colorsys.rgb_to_hsv(r / 255, g / 255, b / 255)
    return h * 360.0, s, v


def histogram_counts(rgb_rows, bins):
    nh, ns, nv = bins
    counts = {}
    n = 0
    for row in rgb_rows:
        for r, g, b in row:
            h, s, v = hsv_pixel(r, g, b)
            key = (min(int(h / 360 * nh), nh - 1), min(int(s * ns), ns - 1), min(int(v * nv), nv - 1))
            counts[key] = counts.get(key, 0) + 1
            n += 1
    return {k: c / n for k, c in counts.items()}


def bhattacharyya(p, q):
    return math.sqrt(max(0.0, 1.0 - sum(math.sqrt(a * b) for a, b in zip(p, q))))
