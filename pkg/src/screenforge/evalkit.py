"""Detection scoring: greedy IoU matching, 101-point AP, mAP@50,
precision/recall at an operating threshold, grouped breakdowns, and a
wall-clock latency bench for external detector commands.

Matching is per sample and class-strict; AP interpolation is the
101-recall-point convention, so absolute numbers are comparable to
detectors evaluated the same way.
"""

from __future__ import annotations

import json
import subprocess
import time
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels
from .model import AnnotatedSample, BBox, dumps_canonical

DEFAULT_CONF_THRESHOLD = 0.25
RECALL_POINTS = np.linspace(0.0, 1.0, 101)


class UnknownSampleId(Exception):
    pass


class RunnerFailed(Exception):
    pass


@dataclass(frozen=True)
class Detection:
    sample_id: str
    box: BBox
    cls: str
    confidence: float


@dataclass
class EvalReport:
    map50: float
    precision: float
    recall: float
    per_class_ap: dict
    per_fill_state: dict  # tag -> {"map50", "precision", "recall"}
    counts: dict  # {"tp", "fp", "fn"} at the operating threshold
    conf_threshold: float

    def to_json(self) -> dict:
        return {
            "map50": self.map50, "precision": self.precision,
            "recall": self.recall, "per_class_ap": self.per_class_ap,
            "per_fill_state": self.per_fill_state, "counts": self.counts,
            "conf_threshold": self.conf_threshold,
        }

    def table(self) -> str:
        lines = [
            f"{'metric':<22}{'value':>10}",
            f"{'mAP@50':<22}{self.map50:>10.4f}",
            f"{'precision':<22}{self.precision:>10.4f}",
            f"{'recall':<22}{self.recall:>10.4f}",
        ]
        for name, ap in sorted(self.per_class_ap.items()):
            lines.append(f"{'AP@50 ' + name:<22}{ap:>10.4f}")
        for tag, metrics in sorted(self.per_fill_state.items()):
            lines.append(f"{tag + ' mAP@50':<22}{metrics['map50']:>10.4f}")
        lines.append(
            f"{'tp/fp/fn':<22}{self.counts['tp']:>4}/{self.counts['fp']}/"
            f"{self.counts['fn']}")
        return "\n".join(lines)


def iou(a: BBox, b: BBox) -> float:
    return kernels.box_iou((a.x, a.y, a.w, a.h), (b.x, b.y, b.w, b.h))


def _det_sort_key(det: Detection):
    return (-det.confidence, det.cls, det.box.x, det.box.y, det.box.w,
            det.box.h, det.sample_id)


def match(dets: list[Detection], gts: list[tuple[BBox, str]],
          iou_thr: float = 0.5):
    """Greedy one-to-one matching within one sample.

    Returns (matched_gt_index per detection in the internally sorted
    order, the sorted detections). Detections are visited by descending
    confidence with a full deterministic tie-break; each claims the
    highest-IoU unclaimed same-class ground truth at IoU >= thr, ties on
    IoU resolved toward the lowest ground-truth index.
    """
    ordered = sorted(dets, key=_det_sort_key)
    if not ordered or not gts:
        return np.full(len(ordered), -1, dtype=np.int64), ordered
    det_boxes = np.array(
        [[d.box.x, d.box.y, d.box.w, d.box.h] for d in ordered], dtype=np.float64)
    gt_boxes = np.array([[g.x, g.y, g.w, g.h] for g, _ in gts], dtype=np.float64)
    classes = sorted({d.cls for d in ordered} | {c for _, c in gts})
    class_code = {c: i for i, c in enumerate(classes)}
    det_cls = np.array([class_code[d.cls] for d in ordered], dtype=np.int64)
    gt_cls = np.array([class_code[c] for _, c in gts], dtype=np.int64)
    ious = kernels.iou_matrix(det_boxes, gt_boxes)
    order = np.arange(len(ordered), dtype=np.int64)
    return kernels.greedy_match(order, ious, det_cls, gt_cls, iou_thr), ordered


def average_precision(scored: list[tuple[float, bool]], n_gt: int) -> float:
    """AP from (confidence, is_true_positive) pairs.

    Precision is interpolated as the max precision at recall >= r over 101
    evenly spaced recall points.
    """
    if n_gt == 0:
        return 0.0
    if not scored:
        return 0.0
    scored = sorted(scored, key=lambda t: -t[0])
    tps = np.cumsum([1 if tp else 0 for _, tp in scored])
    fps = np.cumsum([0 if tp else 1 for _, tp in scored])
    recall = tps / n_gt
    precision = tps / np.maximum(tps + fps, 1)
    # max precision at recall >= r, computed right-to-left
    interp = precision.copy()
    for i in range(len(interp) - 2, -1, -1):
        interp[i] = max(interp[i], interp[i + 1])
    out = 0.0
    for r in RECALL_POINTS:
        idx = np.searchsorted(recall, r, side="left")
        out += interp[idx] if idx < len(interp) else 0.0
    return float(out / len(RECALL_POINTS))


def _match_scored(dets_by_sample, gts_by_sample, iou_thr):
    """(confidence, tp, class, sample_id) per detection, dataset-wide."""
    scored = []
    for sample_id, dets in dets_by_sample.items():
        gts = gts_by_sample.get(sample_id, [])
        matched, ordered = match(dets, gts, iou_thr)
        for i, det in enumerate(ordered):
            scored.append((det.confidence, matched[i] >= 0, det.cls, sample_id))
    return scored


def evaluate(dets: list[Detection], gt_samples: list[AnnotatedSample],
             class_names, group_keys: dict | None = None,
             conf_threshold: float = DEFAULT_CONF_THRESHOLD,
             iou_thr: float = 0.5, class_of=None) -> EvalReport:
    """Score detections against ground truth samples.

    `class_of` maps an Annotation to its class name (defaults to the
    coarse text/image grouping); `class_names` fixes the class universe;
    `group_keys` maps sample_id -> fill tag for the per-state breakdown.
    """
    if class_of is None:
        def class_of(ann):
            return "image" if ann.cls.fine_label.value == "product_image" else "text"

    gts_by_sample: dict[str, list] = {}
    for sample in gt_samples:
        gts_by_sample[sample.sample_id.key] = [
            (a.box, class_of(a)) for a in sample.annotations]

    unknown = {d.sample_id for d in dets} - set(gts_by_sample)
    if unknown:
        raise UnknownSampleId(sorted(unknown)[0])

    dets_by_sample: dict[str, list] = defaultdict(list)
    for det in dets:
        dets_by_sample[det.sample_id].append(det)

    def compute(sample_ids):
        sub_dets = {s: dets_by_sample[s] for s in sample_ids if s in dets_by_sample}
        sub_gts = {s: gts_by_sample[s] for s in sample_ids}
        scored = _match_scored(sub_dets, sub_gts, iou_thr)
        gt_class_counts = defaultdict(int)
        for s in sample_ids:
            for _, cls in gts_by_sample[s]:
                gt_class_counts[cls] += 1
        per_class = {}
        for cls in sorted(gt_class_counts):
            cls_scored = [(c, tp) for c, tp, k, _ in scored if k == cls]
            per_class[cls] = average_precision(cls_scored, gt_class_counts[cls])
        map50 = (sum(per_class.values()) / len(per_class)) if per_class else 0.0
        # operating point: greedy matching is prefix-stable in confidence,
        # so restricting the full match to dets >= threshold is exact
        above = [(c, tp) for c, tp, _, _ in scored if c >= conf_threshold]
        tp = sum(1 for _, is_tp in above if is_tp)
        fp = len(above) - tp
        n_gt = sum(gt_class_counts.values())
        fn = n_gt - tp
        precision = tp / (tp + fp) if (tp + fp) else 0.0
        recall = tp / n_gt if n_gt else 0.0
        return map50, precision, recall, per_class, {"tp": tp, "fp": fp, "fn": fn}

    all_ids = sorted(gts_by_sample)
    map50, precision, recall, per_class, counts = compute(all_ids)

    per_fill = {}
    if group_keys:
        by_tag: dict[str, list] = defaultdict(list)
        for sample_id in all_ids:
            tag = group_keys.get(sample_id)
            if tag is not None:
                by_tag[tag].append(sample_id)
        for tag, ids in sorted(by_tag.items()):
            g_map, g_prec, g_rec, _, _ = compute(ids)
            per_fill[tag] = {"map50": g_map, "precision": g_prec, "recall": g_rec}

    for name in class_names:
        per_class.setdefault(name, 0.0)
    return EvalReport(
        map50=map50, precision=precision, recall=recall,
        per_class_ap=per_class, per_fill_state=per_fill, counts=counts,
        conf_threshold=conf_threshold)


# --- detections file format ---

def write_detections(dets: list[Detection], path: str | Path) -> None:
    lines = [
        f"{d.sample_id} {d.cls} {d.box.x} {d.box.y} {d.box.w} {d.box.h} "
        f"{d.confidence:.6f}"
        for d in sorted(dets, key=_det_sort_key)
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""),
                          encoding="utf-8")


def read_detections(path: str | Path) -> list[Detection]:
    dets = []
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 7:
            raise ValueError(f"{path}:{n}: expected 7 fields, got {len(parts)}")
        sample_id, cls, x, y, w, h, conf = parts
        dets.append(Detection(
            sample_id=sample_id, cls=cls,
            box=BBox(int(x), int(y), int(w), int(h)),
            confidence=float(conf)))
    return dets


# --- latency bench ---

def bench_latency(runner: list[str], images: list[str | Path],
                  warmup: int = 3, reps: int = 10) -> dict:
    """Median/p95 per-image wall time of an external detector command.

    The command is invoked once per (rep, image) with the image path
    appended; the first `warmup` invocations are discarded.
    """
    if not images:
        raise ValueError("no images to bench")
    timings = []
    sequence = [img for _ in range(warmup + reps) for img in images]
    for i, image in enumerate(sequence):
        t0 = time.perf_counter()
        proc = subprocess.run(
            [*runner, str(image)], capture_output=True, text=True)
        elapsed_ms = (time.perf_counter() - t0) * 1000.0
        if proc.returncode != 0:
            raise RunnerFailed(
                f"{runner} exited {proc.returncode}: {proc.stderr[:200]}")
        if i >= warmup * len(images):
            timings.append(elapsed_ms)
    timings.sort()
    n = len(timings)
    return {
        "runs": n,
        "median_ms": round(timings[n // 2] if n % 2 else
                           (timings[n // 2 - 1] + timings[n // 2]) / 2, 3),
        "p95_ms": round(timings[min(n - 1, max(0, -(-95 * n // 100) - 1))], 3),
        "min_ms": round(timings[0], 3),
        "max_ms": round(timings[-1], 3),
    }


def write_report(report: EvalReport, path: str | Path) -> None:
    Path(path).write_text(dumps_canonical(report.to_json()), encoding="utf-8")


def load_report(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
