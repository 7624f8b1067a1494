#!/usr/bin/env python3
"""Benchmark the compiled box-ops kernels against the pure fallback.

Measures pairwise IoU tables and greedy matching over synthetic workloads
shaped like dataset evaluation (tens of boxes per image, many images).

    python3 benchmarks/bench_kernels.py
"""

import time

import numpy as np

from screenforge.kernels import _pure

try:
    from screenforge.kernels import _native
except ImportError:
    _native = None


def workload(n_images: int, n_det: int, n_gt: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    images = []
    for _ in range(n_images):
        dets = rng.integers(0, 1400, size=(n_det, 4)).astype(np.float64)
        gts = rng.integers(0, 1400, size=(n_gt, 4)).astype(np.float64)
        dets[:, 2:] = rng.integers(8, 300, size=(n_det, 2))
        gts[:, 2:] = rng.integers(8, 300, size=(n_gt, 2))
        order = rng.permutation(n_det).astype(np.int64)
        det_cls = rng.integers(0, 2, size=n_det).astype(np.int64)
        gt_cls = rng.integers(0, 2, size=n_gt).astype(np.int64)
        images.append((dets, gts, order, det_cls, gt_cls))
    return images


def run(impl, images) -> float:
    start = time.perf_counter()
    for dets, gts, order, det_cls, gt_cls in images:
        ious = impl.iou_matrix(dets, gts)
        impl.greedy_match(order, ious, det_cls, gt_cls, 0.5)
    return time.perf_counter() - start


def main():
    cases = [
        ("small  (1000 x 10x10)", workload(1000, 10, 10)),
        ("medium (1000 x 30x25)", workload(1000, 30, 25)),
        ("large  (200 x 120x100)", workload(200, 120, 100)),
    ]
    print(f"{'case':<26}{'pure':>12}{'native':>12}{'speedup':>10}")
    for name, images in cases:
        run(_pure, images[:10])  # warm caches
        pure_s = run(_pure, images)
        if _native is None:
            print(f"{name:<26}{pure_s * 1000:>10.1f}ms{'n/a':>12}{'-':>10}")
            continue
        run(_native, images[:10])
        native_s = run(_native, images)
        # both paths must agree before their timings mean anything
        dets, gts, order, det_cls, gt_cls = images[0]
        assert np.allclose(_pure.iou_matrix(dets, gts),
                           _native.iou_matrix(dets, gts))
        print(f"{name:<26}{pure_s * 1000:>10.1f}ms{native_s * 1000:>10.1f}ms"
              f"{pure_s / native_s:>9.1f}x")


if __name__ == "__main__":
    main()
