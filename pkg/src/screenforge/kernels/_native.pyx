# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled box-ops kernels: pairwise IoU and greedy box matching.

Must stay result-identical to kernels._pure; the test suite cross-checks
both implementations on random instances.
"""

import numpy as np

IMPL = "native"


def box_iou(a, b):
    cdef double ax = a[0], ay = a[1], aw = a[2], ah = a[3]
    cdef double bx = b[0], by = b[1], bw = b[2], bh = b[3]
    cdef double ix = min(ax + aw, bx + bw) - max(ax, bx)
    cdef double iy = min(ay + ah, by + bh) - max(ay, by)
    if ix <= 0 or iy <= 0:
        return 0.0
    cdef double inter = ix * iy
    cdef double union_ = aw * ah + bw * bh - inter
    return inter / union_


def iou_matrix(dets, gts):
    cdef double[:, :] d = np.ascontiguousarray(dets, dtype=np.float64).reshape(-1, 4)
    cdef double[:, :] g = np.ascontiguousarray(gts, dtype=np.float64).reshape(-1, 4)
    cdef Py_ssize_t n = d.shape[0], m = g.shape[0]
    out_arr = np.zeros((n, m), dtype=np.float64)
    cdef double[:, :] out = out_arr
    cdef Py_ssize_t i, j
    cdef double ix, iy, inter, union_
    for i in range(n):
        for j in range(m):
            ix = min(d[i, 0] + d[i, 2], g[j, 0] + g[j, 2]) - max(d[i, 0], g[j, 0])
            iy = min(d[i, 1] + d[i, 3], g[j, 1] + g[j, 3]) - max(d[i, 1], g[j, 1])
            if ix > 0 and iy > 0:
                inter = ix * iy
                union_ = d[i, 2] * d[i, 3] + g[j, 2] * g[j, 3] - inter
                if union_ > 0:
                    out[i, j] = inter / union_
    return out_arr


def greedy_match(order, ious, det_classes, gt_classes, double thr):
    cdef long[:] order_v = np.ascontiguousarray(order, dtype=np.int64)
    cdef double[:, :] iou_v = np.ascontiguousarray(ious, dtype=np.float64)
    cdef long[:] dc = np.ascontiguousarray(det_classes, dtype=np.int64)
    cdef long[:] gc = np.ascontiguousarray(gt_classes, dtype=np.int64)
    cdef Py_ssize_t n = iou_v.shape[0], m = iou_v.shape[1]
    matched_arr = np.full(n, -1, dtype=np.int64)
    cdef long[:] matched = matched_arr
    claimed_arr = np.zeros(m, dtype=np.int64)
    cdef long[:] claimed = claimed_arr
    cdef Py_ssize_t k, d, g, best
    cdef double best_iou, v
    for k in range(order_v.shape[0]):
        d = order_v[k]
        best = -1
        best_iou = -1.0
        for g in range(m):
            if claimed[g] or gc[g] != dc[d]:
                continue
            v = iou_v[d, g]
            if v >= thr and v > best_iou:
                best = g
                best_iou = v
        if best >= 0:
            matched[d] = best
            claimed[best] = 1
    return matched_arr
