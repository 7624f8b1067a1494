"""Pure fallback for the box-ops kernels.

Same contracts and results as the compiled module; numpy is used for the
pairwise IoU table, plain loops for the greedy matcher.
"""

from __future__ import annotations

import numpy as np

IMPL = "pure"


def box_iou(a, b) -> float:
    """IoU of two (x, y, w, h) boxes."""
    ix = min(a[0] + a[2], b[0] + b[2]) - max(a[0], b[0])
    iy = min(a[1] + a[3], b[1] + b[3]) - max(a[1], b[1])
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = a[2] * a[3] + b[2] * b[3] - inter
    return float(inter / union)


def iou_matrix(dets: np.ndarray, gts: np.ndarray) -> np.ndarray:
    """Pairwise IoU table for (N,4) vs (M,4) arrays of (x, y, w, h)."""
    dets = np.asarray(dets, dtype=np.float64).reshape(-1, 4)
    gts = np.asarray(gts, dtype=np.float64).reshape(-1, 4)
    dx1, dy1 = dets[:, 0:1], dets[:, 1:2]
    dx2, dy2 = dx1 + dets[:, 2:3], dy1 + dets[:, 3:4]
    gx1, gy1 = gts[:, 0], gts[:, 1]
    gx2, gy2 = gx1 + gts[:, 2], gy1 + gts[:, 3]
    iw = np.minimum(dx2, gx2[None, :]) - np.maximum(dx1, gx1[None, :])
    ih = np.minimum(dy2, gy2[None, :]) - np.maximum(dy1, gy1[None, :])
    inter = np.clip(iw, 0, None) * np.clip(ih, 0, None)
    union = (dets[:, 2] * dets[:, 3])[:, None] + (gts[:, 2] * gts[:, 3])[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0)
    return out


def greedy_match(order, ious: np.ndarray, det_classes, gt_classes, thr: float):
    """Greedy one-to-one assignment.

    Visits detections in `order`; each claims the unclaimed same-class
    ground truth with the highest IoU >= thr, ties broken by ascending
    ground-truth index. Returns per-detection gt index, -1 if unmatched.
    """
    n, m = ious.shape
    matched = np.full(n, -1, dtype=np.int64)
    claimed = np.zeros(m, dtype=bool)
    for d in order:
        best = -1
        best_iou = -1.0
        for g in range(m):
            if claimed[g] or gt_classes[g] != det_classes[d]:
                continue
            v = ious[d, g]
            # strictly-greater keeps the lowest-index gt on exact ties
            if v >= thr and v > best_iou:
                best, best_iou = g, v
        if best >= 0:
            matched[d] = best
            claimed[best] = True
    return matched
