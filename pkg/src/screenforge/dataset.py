"""Dataset assembly: hold-out splits, leakage checks, export, statistics.

Splits operate at layout granularity — every variant and fill state of a
layout travels with it. Export refuses to write anything while the
leakage report is non-empty or any sample fails validation.
"""

from __future__ import annotations

import json
import math
import shutil
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from random import Random

from . import __version__
from .configgen import DataConfig, leakage_values
from .model import (
    AnnotatedSample,
    Annotation,
    AnnotationClass,
    BBox,
    FineLabel,
    SampleId,
    dumps_canonical,
    validate_sample,
)


class UnknownBrand(Exception):
    pass


class UnknownPageType(Exception):
    pass


class UnvalidatedSample(Exception):
    pass


class LeakageUnresolved(Exception):
    pass


@dataclass(frozen=True)
class LayoutInfo:
    layout_id: str
    brand: str = ""
    page_type: str = ""


@dataclass
class SplitAssignment:
    strategy: str  # e.g. "cross_page(0.2)", "cross_company(amazon)"
    train: frozenset[str]
    test: frozenset[str]
    seed: int

    def side(self, layout_id: str) -> str:
        return "test" if layout_id in self.test else "train"

    def to_json(self) -> dict:
        return {"strategy": self.strategy, "seed": self.seed,
                "train": sorted(self.train), "test": sorted(self.test)}

    @classmethod
    def from_json(cls, obj: dict) -> "SplitAssignment":
        return cls(obj["strategy"], frozenset(obj["train"]),
                   frozenset(obj["test"]), obj["seed"])


def split_cross_page(layouts, frac: float, seed: int,
                     stratify_brand: bool = False) -> SplitAssignment:
    """Hold out ceil(frac * L) layouts uniformly at random."""
    ids = sorted(l.layout_id for l in layouts)
    rng = Random(seed)
    n_test = math.ceil(frac * len(ids))
    if stratify_brand:
        by_brand: dict[str, list[str]] = defaultdict(list)
        for l in sorted(layouts, key=lambda l: l.layout_id):
            by_brand[l.brand].append(l.layout_id)
        test: list[str] = []
        for brand in sorted(by_brand):
            group = by_brand[brand]
            take = round(frac * len(group))
            test += rng.sample(group, min(take, len(group)))
        # round-off correction to hit the exact global count
        remaining = [i for i in ids if i not in set(test)]
        while len(test) < n_test and remaining:
            test.append(remaining.pop(rng.randrange(len(remaining))))
        test = test[:n_test]
    else:
        test = rng.sample(ids, n_test)
    test_set = frozenset(test)
    return SplitAssignment(
        strategy=f"cross_page({frac})",
        train=frozenset(ids) - test_set, test=test_set, seed=seed)


def split_cross_company(layouts, brand: str, seed: int = 0) -> SplitAssignment:
    test = frozenset(l.layout_id for l in layouts if l.brand == brand)
    if not test:
        raise UnknownBrand(brand)
    train = frozenset(l.layout_id for l in layouts) - test
    return SplitAssignment(f"cross_company({brand})", train, test, seed)


def split_cross_type(layouts, page_type: str, seed: int = 0) -> SplitAssignment:
    test = frozenset(l.layout_id for l in layouts if l.page_type == page_type)
    if not test:
        raise UnknownPageType(page_type)
    train = frozenset(l.layout_id for l in layouts) - test
    return SplitAssignment(f"cross_type({page_type})", train, test, seed)


def split(layouts, strategy: str, seed: int, stratify_brand: bool = False):
    """Parse a strategy string: cross-page:0.2 | cross-company:<brand> |
    cross-type:<page_type>."""
    kind, _, arg = strategy.partition(":")
    kind = kind.replace("_", "-")
    if kind == "cross-page":
        return split_cross_page(layouts, float(arg or 0.2), seed, stratify_brand)
    if kind == "cross-company":
        return split_cross_company(layouts, arg, seed)
    if kind == "cross-type":
        return split_cross_type(layouts, arg, seed)
    raise ValueError(f"unknown split strategy {strategy!r}")


# --- leakage ---

@dataclass(frozen=True)
class LeakageFinding:
    value: str
    train_layouts: tuple[str, ...]
    test_layouts: tuple[str, ...]


def check_leakage(assignment: SplitAssignment,
                  configs_by_layout: dict[str, list[DataConfig]]) -> list[LeakageFinding]:
    """Sensitive injected values occurring on both sides of the split."""
    occurrences: dict[str, dict[str, set[str]]] = defaultdict(
        lambda: {"train": set(), "test": set()})
    for layout_id, configs in configs_by_layout.items():
        side = assignment.side(layout_id)
        for config in configs:
            for value in leakage_values(config):
                occurrences[value][side].add(layout_id)
    findings = []
    for value in sorted(occurrences):
        sides = occurrences[value]
        if sides["train"] and sides["test"]:
            findings.append(LeakageFinding(
                value=value,
                train_layouts=tuple(sorted(sides["train"])),
                test_layouts=tuple(sorted(sides["test"]))))
    return findings


# --- class mapping ---

@dataclass(frozen=True)
class ClassMap:
    mode: str  # "fine" or "coarse"

    def names(self) -> list[str]:
        if self.mode == "coarse":
            return ["text", "image"]
        return [f.value for f in FineLabel]

    def index_of(self, cls: AnnotationClass) -> int:
        if self.mode == "coarse":
            return 1 if cls.fine_label == FineLabel.PRODUCT_IMAGE else 0
        return self.names().index(cls.fine_label.value)

    def name_of(self, cls: AnnotationClass) -> str:
        return self.names()[self.index_of(cls)]


# --- export ---

def _require_clean(samples, leakage: list[LeakageFinding]) -> None:
    if leakage:
        raise LeakageUnresolved(
            f"{len(leakage)} leaked value(s); first: {leakage[0].value!r}")
    for sample in samples:
        violations = validate_sample(sample)
        if violations:
            raise UnvalidatedSample(
                f"{sample.sample_id.key}: {violations[0].invariant}: "
                f"{violations[0].message}")


def _yolo_line(ann: Annotation, class_map: ClassMap, dims) -> str:
    width, height = dims
    cx = (ann.box.x + ann.box.w / 2) / width
    cy = (ann.box.y + ann.box.h / 2) / height
    return (f"{class_map.index_of(ann.cls)} {cx:.6f} {cy:.6f} "
            f"{ann.box.w / width:.6f} {ann.box.h / height:.6f}")


def export(samples: list[AnnotatedSample], assignment: SplitAssignment,
           class_map: ClassMap, fmt: str, out_dir: str | Path,
           leakage: list[LeakageFinding] | None = None,
           extra_manifest: dict | None = None) -> dict:
    """Write a detection dataset under out_dir; returns the manifest."""
    if fmt not in ("coco", "yolo"):
        raise ValueError(f"unknown export format {fmt!r}")
    _require_clean(samples, leakage or [])
    out = Path(out_dir)
    by_split: dict[str, list[AnnotatedSample]] = {"train": [], "test": []}
    for sample in samples:
        by_split[assignment.side(sample.layout_id)].append(sample)

    counts = {}
    for split_name, members in by_split.items():
        members.sort(key=lambda s: s.sample_id.key)
        split_dir = out / split_name
        images_dir = split_dir / "images"
        images_dir.mkdir(parents=True, exist_ok=True)
        if fmt == "yolo":
            labels_dir = split_dir / "labels"
            labels_dir.mkdir(parents=True, exist_ok=True)
        index = {"images": [], "annotations": [],
                 "categories": [{"id": i, "name": name}
                                for i, name in enumerate(class_map.names())]}
        ann_id = 0
        for img_id, sample in enumerate(members):
            stem = sample.sample_id.key
            src = Path(sample.image_ref)
            if src.is_file():
                shutil.copyfile(src, images_dir / f"{stem}.png")
            if fmt == "yolo":
                lines = [_yolo_line(a, class_map, sample.image_dims)
                         for a in sample.annotations]
                (labels_dir / f"{stem}.txt").write_text(
                    "\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
            else:
                index["images"].append({
                    "id": img_id, "file_name": f"images/{stem}.png",
                    "width": sample.image_dims[0], "height": sample.image_dims[1],
                    "sample_id": stem, "layout_id": sample.layout_id,
                    "config_seed": sample.config_seed,
                    "variant_index": sample.variant_index,
                    "fill_state": sample.fill_state,
                })
                for ann in sample.annotations:
                    index["annotations"].append({
                        "id": ann_id, "image_id": img_id,
                        "category_id": class_map.index_of(ann.cls),
                        "bbox": [ann.box.x, ann.box.y, ann.box.w, ann.box.h],
                        "area": ann.box.area, "iscrowd": 0,
                        "source_key": ann.source_key,
                        "line_index": ann.line_index,
                        "fine_label": ann.cls.fine_label.value,
                        "element_kind": ann.cls.element_kind.value,
                        "kind": ann.cls.kind.value,
                        "visibility": ann.visibility.value,
                    })
                    ann_id += 1
        if fmt == "coco":
            (split_dir / "annotations.index").write_text(
                dumps_canonical(index), encoding="utf-8")
        counts[split_name] = {
            "images": len(members),
            "annotations": sum(len(s.annotations) for s in members)}

    manifest = {
        "tool": "screenforge", "version": __version__,
        "format": fmt, "classes": class_map.mode,
        "class_names": class_map.names(),
        "split": assignment.to_json(),
        "counts": counts,
    }
    if extra_manifest:
        manifest.update(extra_manifest)
    (out / "manifest").write_text(dumps_canonical(manifest), encoding="utf-8")
    return manifest


def import_coco(split_dir: str | Path) -> list[AnnotatedSample]:
    """Read back a coco-format split written by export()."""
    from .model import ElementKind, Kind, Visibility

    index = json.loads(
        (Path(split_dir) / "annotations.index").read_text(encoding="utf-8"))
    by_image: dict[int, list] = defaultdict(list)
    for entry in index["annotations"]:
        by_image[entry["image_id"]].append(entry)
    samples = []
    for image in index["images"]:
        anns = [
            Annotation(
                box=BBox(*entry["bbox"]),
                cls=AnnotationClass(
                    Kind(entry["kind"]), FineLabel(entry["fine_label"]),
                    ElementKind(entry["element_kind"])),
                source_key=entry["source_key"],
                line_index=entry["line_index"],
                visibility=Visibility(entry["visibility"]))
            for entry in by_image[image["id"]]
        ]
        samples.append(AnnotatedSample(
            image_ref=str(Path(split_dir) / image["file_name"]),
            layout_id=image["layout_id"], config_seed=image["config_seed"],
            fill_state=image["fill_state"], annotations=anns,
            image_dims=(image["width"], image["height"]),
            variant_index=image["variant_index"]))
    return samples


# --- statistics ---

def stats(samples: list[AnnotatedSample],
          layout_info: dict[str, LayoutInfo] | None = None) -> dict:
    """Distribution report over a sample set."""
    boxes_per_image = sorted(len(s.annotations) for s in samples)
    n = len(boxes_per_image)
    total_boxes = sum(boxes_per_image)

    def pct(count: int, total: int) -> float:
        return round(100.0 * count / total, 1) if total else 0.0

    if n:
        mid = n // 2
        median = (boxes_per_image[mid] if n % 2
                  else (boxes_per_image[mid - 1] + boxes_per_image[mid]) / 2)
    else:
        median = 0

    class_counts = Counter()
    element_counts = Counter()
    for sample in samples:
        for ann in sample.annotations:
            class_counts[ann.cls.fine_label.value] += 1
            element_counts[ann.cls.element_kind.value] += 1
    fill_counts = Counter(s.fill_state.split("_")[0] for s in samples)

    report = {
        "images": n,
        "annotations": total_boxes,
        "boxes_per_image": {
            "median": median,
            "mean": round(total_boxes / n, 2) if n else 0,
            "min": boxes_per_image[0] if n else 0,
            "max": boxes_per_image[-1] if n else 0,
        },
        "class_pct": {k: pct(v, total_boxes)
                      for k, v in sorted(class_counts.items())},
        "element_kind_pct": {k: pct(v, total_boxes)
                             for k, v in sorted(element_counts.items())},
        "fill_state_pct": {k: pct(v, n) for k, v in sorted(fill_counts.items())},
    }
    if layout_info is not None:
        brand_counts = Counter()
        type_counts = Counter()
        for sample in samples:
            info = layout_info.get(sample.layout_id)
            if info:
                brand_counts[info.brand] += 1
                type_counts[info.page_type] += 1
        report["per_brand"] = dict(sorted(brand_counts.items()))
        report["per_page_type"] = dict(sorted(type_counts.items()))
    return report
