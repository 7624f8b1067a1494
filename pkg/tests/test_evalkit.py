import math
from random import Random

import pytest

from screenforge.evalkit import (
    Detection,
    RunnerFailed,
    UnknownSampleId,
    average_precision,
    bench_latency,
    evaluate,
    iou,
    match,
    read_detections,
    write_detections,
)
from screenforge.model import (
    AnnotatedSample,
    Annotation,
    AnnotationClass,
    BBox,
    FineLabel,
)


def det(x, y, w, h, conf, cls="text", sid="s0"):
    return Detection(sid, BBox(x, y, w, h), cls, conf)


def gt(x, y, w, h, cls="text"):
    return (BBox(x, y, w, h), cls)


# --- independent brute-force reference (no kernels, no shared code) ---

def ref_iou(a: BBox, b: BBox) -> float:
    x1, y1 = max(a.x, b.x), max(a.y, b.y)
    x2, y2 = min(a.x + a.w, b.x + b.w), min(a.y + a.h, b.y + b.h)
    inter = max(0, x2 - x1) * max(0, y2 - y1)
    union = a.w * a.h + b.w * b.h - inter
    return inter / union if union else 0.0


def ref_greedy(dets, gts, thr):
    """Same documented rule, written independently over plain lists."""
    order = sorted(
        range(len(dets)),
        key=lambda i: (-dets[i].confidence, dets[i].cls, dets[i].box.x,
                       dets[i].box.y, dets[i].box.w, dets[i].box.h,
                       dets[i].sample_id))
    claimed = set()
    assigned = {}
    for i in order:
        best, best_v = None, thr - 1e-18
        for g, (gbox, gcls) in enumerate(gts):
            if g in claimed or gcls != dets[i].cls:
                continue
            v = ref_iou(dets[i].box, gbox)
            if v >= thr and v > best_v:
                best, best_v = g, v
        if best is not None:
            claimed.add(best)
            assigned[i] = best
    return assigned


def ref_ap(points, n_gt):
    """Direct 101-point PR-curve enumeration."""
    if n_gt == 0 or not points:
        return 0.0
    points = sorted(points, key=lambda t: -t[0])
    tp = fp = 0
    curve = []  # (recall, precision)
    for _, is_tp in points:
        tp += is_tp
        fp += not is_tp
        curve.append((tp / n_gt, tp / (tp + fp)))
    total = 0.0
    for k in range(101):
        r = k / 100
        candidates = [p for rec, p in curve if rec >= r]
        total += max(candidates) if candidates else 0.0
    return total / 101


def ref_evaluate(dets_by_sample, gts_by_sample, thr=0.5):
    """Full reference pipeline: greedy per sample, AP per class."""
    scored = []
    for sid, dets in dets_by_sample.items():
        assigned = ref_greedy(dets, gts_by_sample.get(sid, []), thr)
        for i, d in enumerate(dets):
            scored.append((d.confidence, i in assigned, d.cls))
    n_gt = {}
    for gts in gts_by_sample.values():
        for _, cls in gts:
            n_gt[cls] = n_gt.get(cls, 0) + 1
    aps = {cls: ref_ap([(c, tp) for c, tp, k in scored if k == cls], n)
           for cls, n in n_gt.items()}
    return sum(aps.values()) / len(aps) if aps else 0.0, aps


# --- iou ---

def test_iou_identity():
    assert iou(BBox(1, 2, 10, 10), BBox(1, 2, 10, 10)) == 1.0


def test_iou_disjoint():
    assert iou(BBox(0, 0, 10, 10), BBox(100, 0, 10, 10)) == 0.0


def test_iou_one_third():
    assert iou(BBox(0, 0, 10, 10), BBox(5, 0, 10, 10)) == pytest.approx(1 / 3)


# --- match ---

def test_match_single_true_positive():
    matched, ordered = match([det(0, 0, 10, 10, 0.9)], [gt(0, 0, 10, 10)])
    assert list(matched) == [0]


def test_match_two_dets_one_gt():
    matched, ordered = match(
        [det(0, 0, 10, 10, 0.9), det(1, 0, 10, 10, 0.8)], [gt(0, 0, 10, 10)])
    assert list(matched) == [0, -1]  # one TP, one FP


def test_match_matches_brute_force_oracle():
    rng = Random(5)
    for _ in range(100):
        n_det, n_gt_boxes = rng.randint(0, 8), rng.randint(0, 6)
        dets = [det(rng.randint(0, 40), rng.randint(0, 40), rng.randint(5, 30),
                    rng.randint(5, 30), round(rng.random(), 2),
                    cls=rng.choice(["text", "image"])) for _ in range(n_det)]
        gts = [gt(rng.randint(0, 40), rng.randint(0, 40), rng.randint(5, 30),
                  rng.randint(5, 30), cls=rng.choice(["text", "image"]))
               for _ in range(n_gt_boxes)]
        matched, ordered = match(dets, gts)
        ref = ref_greedy(ordered, gts, 0.5)
        for i in range(len(ordered)):
            assert matched[i] == ref.get(i, -1)


def test_match_order_invariant_among_equal_confidence():
    dets = [det(0, 0, 10, 10, 0.5), det(20, 0, 10, 10, 0.5)]
    gts = [gt(0, 0, 10, 10), gt(20, 0, 10, 10)]
    m1, o1 = match(dets, gts)
    m2, o2 = match(list(reversed(dets)), gts)
    assert [(o.box.x, g) for o, g in zip(o1, m1)] == \
        [(o.box.x, g) for o, g in zip(o2, m2)]


# --- average precision ---

def test_ap_perfect_detections():
    assert average_precision([(1.0, True), (1.0, True)], 2) == 1.0


def test_ap_zero_detections():
    assert average_precision([], 5) == 0.0


def test_ap_hand_built_pr_curve():
    # 5 detections, one mid-ranked FP, 4 gts:
    # ranked: TP TP FP TP TP -> recall .25 .5 .5 .75 1.0
    # precision 1 1 .667 .75 .8; interpolated max-right:
    # r<=0.5 -> 1.0, 0.5<r<=0.75 -> .8, 0.75<r<=1 -> .8
    scored = [(0.9, True), (0.8, True), (0.7, False), (0.6, True), (0.5, True)]
    got = average_precision(scored, 4)
    want = ref_ap(scored, 4)
    # direct enumeration: 51 points at 1.0 (r=0..0.50), 50 points at 0.8
    assert want == pytest.approx((51 * 1.0 + 50 * 0.8) / 101)
    assert got == pytest.approx(want, abs=1e-12)


def test_ap_monotone_adding_tp():
    base = [(0.9, True), (0.5, False)]
    more = base + [(0.4, True)]
    assert average_precision(more, 3) >= average_precision(base, 3) - 1e-12


# --- evaluate ---

def sample_of(sid, boxes, dims=(200, 200)):
    anns = []
    for i, (x, y, w, h, cls) in enumerate(boxes):
        fine = FineLabel.PRODUCT_IMAGE if cls == "image" else FineLabel.NAME
        anns.append(Annotation(
            BBox(x, y, w, h), AnnotationClass.for_fine(fine), f"K{i}"))
    lay, var, tag = sid.split("__")
    return AnnotatedSample(
        image_ref="x.png", layout_id=lay, config_seed=0, fill_state=tag,
        annotations=anns, image_dims=dims, variant_index=int(var[1:]))


def test_evaluate_perfect_predictions():
    gt_samples = [
        sample_of("a__v000__full", [(0, 0, 20, 20, "text"), (50, 50, 30, 30, "image")]),
        sample_of("b__v000__empty", [(10, 10, 20, 20, "text")]),
    ]
    dets = []
    for s in gt_samples:
        for a in s.annotations:
            cls = "image" if a.cls.fine_label == FineLabel.PRODUCT_IMAGE else "text"
            dets.append(Detection(s.sample_id.key, a.box, cls, 1.0))
    report = evaluate(dets, gt_samples, ["text", "image"])
    assert report.map50 == 1.0
    assert report.precision == 1.0
    assert report.recall == 1.0


def test_evaluate_empty_detections():
    gt_samples = [sample_of("a__v000__full", [(0, 0, 20, 20, "text")])]
    report = evaluate([], gt_samples, ["text", "image"])
    assert report.map50 == 0.0
    assert report.recall == 0.0


def test_evaluate_single_class_predictions_halve_map():
    gt_samples = [sample_of("a__v000__full",
                            [(0, 0, 20, 20, "text"), (50, 50, 30, 30, "image")])]
    dets = [Detection("a__v000__full", BBox(0, 0, 20, 20), "text", 0.9)]
    report = evaluate(dets, gt_samples, ["text", "image"])
    assert report.per_class_ap["text"] == 1.0
    assert report.per_class_ap["image"] == 0.0
    assert report.map50 == pytest.approx(0.5)


def test_evaluate_matches_reference_on_random_instances():
    rng = Random(11)
    for trial in range(100):
        gt_samples = []
        dets = []
        dets_by, gts_by = {}, {}
        for s in range(rng.randint(1, 3)):
            sid = f"lay{s}__v000__full"
            n_gt_boxes = rng.randint(0, 10)
            boxes = [(rng.randint(0, 60), rng.randint(0, 60),
                      rng.randint(5, 40), rng.randint(5, 40),
                      rng.choice(["text", "image"])) for _ in range(n_gt_boxes)]
            sample = sample_of(sid, boxes)
            gt_samples.append(sample)
            gts_by[sid] = [(a.box,
                            "image" if a.cls.fine_label == FineLabel.PRODUCT_IMAGE
                            else "text") for a in sample.annotations]
            sample_dets = [det(rng.randint(0, 60), rng.randint(0, 60),
                               rng.randint(5, 40), rng.randint(5, 40),
                               round(rng.random(), 3),
                               cls=rng.choice(["text", "image"]), sid=sid)
                           for _ in range(rng.randint(0, 10))]
            dets += sample_dets
            dets_by[sid] = sample_dets
        report = evaluate(dets, gt_samples, ["text", "image"])
        ref_map, ref_aps = ref_evaluate(dets_by, gts_by)
        classes_present = {c for g in gts_by.values() for _, c in g}
        assert abs(report.map50 - ref_map) < 1e-9, f"trial {trial}"
        for cls in classes_present:
            assert abs(report.per_class_ap[cls] - ref_aps[cls]) < 1e-9


def test_evaluate_groups_by_fill_state():
    gt_samples = [
        sample_of("a__v000__full", [(0, 0, 20, 20, "text")]),
        sample_of("a__v000__empty", [(0, 0, 20, 20, "text")]),
    ]
    dets = [Detection("a__v000__full", BBox(0, 0, 20, 20), "text", 0.9)]
    report = evaluate(dets, gt_samples, ["text"], group_keys={
        "a__v000__full": "full", "a__v000__empty": "empty"})
    assert report.per_fill_state["full"]["map50"] == 1.0
    assert report.per_fill_state["empty"]["map50"] == 0.0


def test_evaluate_unknown_sample_id():
    gt_samples = [sample_of("a__v000__full", [(0, 0, 20, 20, "text")])]
    with pytest.raises(UnknownSampleId):
        evaluate([Detection("ghost__v000__full", BBox(0, 0, 5, 5), "text", 1.0)],
                 gt_samples, ["text"])


def test_detections_file_round_trip(tmp_path):
    dets = [det(1, 2, 3, 4, 0.5), det(9, 9, 9, 9, 0.25, cls="image", sid="s1")]
    path = tmp_path / "dets.txt"
    write_detections(dets, path)
    again = read_detections(path)
    assert set(again) == set(dets)
    write_detections(again, tmp_path / "dets2.txt")
    assert path.read_bytes() == (tmp_path / "dets2.txt").read_bytes()


def test_scale_invariance_of_metrics():
    rng = Random(3)
    gt_boxes = [(rng.randint(0, 50), rng.randint(0, 50),
                 rng.randint(5, 30), rng.randint(5, 30), "text")
                for _ in range(6)]
    dets1 = [det(x + rng.randint(-3, 3), y + rng.randint(-3, 3), w, h,
                 round(rng.random(), 2), sid="s0__v000__full")
             for x, y, w, h, _ in gt_boxes]
    factor = 4
    gt_scaled = [(x * factor, y * factor, w * factor, h * factor, c)
                 for x, y, w, h, c in gt_boxes]
    dets2 = [det(d.box.x * factor, d.box.y * factor, d.box.w * factor,
                 d.box.h * factor, d.confidence, sid=d.sample_id)
             for d in dets1]
    r1 = evaluate(dets1, [sample_of("s0__v000__full", gt_boxes)], ["text"])
    r2 = evaluate(dets2, [sample_of("s0__v000__full", gt_scaled,
                                    dims=(800, 800))], ["text"])
    assert r1.map50 == pytest.approx(r2.map50, abs=1e-12)
    assert r1.precision == pytest.approx(r2.precision, abs=1e-12)
    assert r1.recall == pytest.approx(r2.recall, abs=1e-12)


# --- latency bench ---

def test_bench_latency_sleep_oracle(tmp_path):
    img = tmp_path / "x.png"
    img.write_bytes(b"png")
    # known-sleep oracle; the image path lands in $0 of the -c script
    runner = ["sh", "-c", "sleep 0.05"]
    result = bench_latency(runner, [img], warmup=2, reps=20)
    assert result["runs"] == 20
    assert 50 <= result["median_ms"] <= 60


def test_bench_latency_runner_failure(tmp_path):
    img = tmp_path / "x.png"
    img.write_bytes(b"png")
    with pytest.raises(RunnerFailed):
        bench_latency(["python3", "-c", "import sys; sys.exit(3)"], [img],
                      warmup=0, reps=1)


def test_bench_latency_warmup_excluded(tmp_path):
    img = tmp_path / "x.png"
    img.write_bytes(b"png")
    result = bench_latency(["python3", "-c", "pass"], [img], warmup=3, reps=5)
    assert result["runs"] == 5
