"""Shared domain vocabulary: annotation taxonomy, geometry, sample records.

Everything downstream (extraction, export, evaluation) speaks these types.
They are plain immutable values, safe to share across workers, with a
single validation entry point (:func:`validate_sample`) that the pipeline
uses as a gate before any sample leaves the process.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

RECORD_SCHEMA_VERSION = 1


class Kind(str, Enum):
    """Data-attribute family an annotation belongs to."""

    PII = "pii"
    PRODUCT = "product"
    ORDER = "order"


class FineLabel(str, Enum):
    """Nine-way fine-grained annotation class."""

    NAME = "name"
    ADDRESS = "address"
    CONTACT = "contact"
    PAYMENT = "payment"
    OTHER_PII = "other_pii"
    PRODUCT_TEXT = "product_text"
    PRODUCT_IMAGE = "product_image"
    ORDER_INFO = "order_info"
    INPUT_FIELD = "input_field"


class ElementKind(str, Enum):
    TEXT = "text"
    INPUT = "input"
    IMAGE = "image"


class Visibility(str, Enum):
    FULL = "full"
    CLIPPED = "clipped"


# Each fine label belongs to exactly one family. Form inputs collect user
# data, so input_field sits in the pii family.
FINE_TO_KIND = {
    FineLabel.NAME: Kind.PII,
    FineLabel.ADDRESS: Kind.PII,
    FineLabel.CONTACT: Kind.PII,
    FineLabel.PAYMENT: Kind.PII,
    FineLabel.OTHER_PII: Kind.PII,
    FineLabel.INPUT_FIELD: Kind.PII,
    FineLabel.PRODUCT_TEXT: Kind.PRODUCT,
    FineLabel.PRODUCT_IMAGE: Kind.PRODUCT,
    FineLabel.ORDER_INFO: Kind.ORDER,
}

# product_image is the only image class, input_field the only input class;
# every other label annotates rendered text.
FINE_TO_ELEMENT = {
    FineLabel.PRODUCT_IMAGE: ElementKind.IMAGE,
    FineLabel.INPUT_FIELD: ElementKind.INPUT,
}


def element_kind_for(fine: FineLabel) -> ElementKind:
    return FINE_TO_ELEMENT.get(fine, ElementKind.TEXT)


@dataclass(frozen=True)
class AnnotationClass:
    kind: Kind
    fine_label: FineLabel
    element_kind: ElementKind

    @classmethod
    def for_fine(cls, fine: FineLabel) -> "AnnotationClass":
        """The unique consistent class for a fine label."""
        return cls(FINE_TO_KIND[fine], fine, element_kind_for(fine))


@dataclass(frozen=True)
class BBox:
    """Integer pixel box, origin top-left, width/height strictly positive."""

    x: int
    y: int
    w: int
    h: int

    @property
    def x2(self) -> int:
        return self.x + self.w

    @property
    def y2(self) -> int:
        return self.y + self.h

    @property
    def area(self) -> int:
        return self.w * self.h


@dataclass(frozen=True)
class Annotation:
    box: BBox
    cls: AnnotationClass
    source_key: str  # config key (e.g. PII_FULLNAME); may be empty for inputs
    line_index: int = 0
    visibility: Visibility = Visibility.FULL


@dataclass(frozen=True)
class SampleId:
    layout_id: str
    variant_index: int
    fill_tag: str  # "full", "empty" or "partial_<k>"

    @property
    def key(self) -> str:
        return f"{self.layout_id}__v{self.variant_index:03d}__{self.fill_tag}"

    @classmethod
    def parse(cls, key: str) -> "SampleId":
        layout_id, variant, fill_tag = key.rsplit("__", 2)
        if not variant.startswith("v"):
            raise ValueError(f"malformed sample id: {key!r}")
        return cls(layout_id, int(variant[1:]), fill_tag)


@dataclass
class AnnotatedSample:
    image_ref: str
    layout_id: str
    config_seed: int
    fill_state: str  # fill tag
    annotations: list[Annotation]
    image_dims: tuple[int, int]  # (width, height)
    variant_index: int = 0

    @property
    def sample_id(self) -> SampleId:
        return SampleId(self.layout_id, self.variant_index, self.fill_state)


@dataclass(frozen=True)
class Violation:
    """One invariant breach; `annotation` indexes into the sample when set."""

    invariant: str
    message: str
    annotation: int | None = None


def validate_sample(sample: AnnotatedSample) -> list[Violation]:
    """Check every type invariant; returns [] iff the sample is clean.

    Never raises: malformed input is reported as violations.
    """
    out: list[Violation] = []
    width, height = sample.image_dims
    seen: dict[tuple[str, int], int] = {}
    for i, ann in enumerate(sample.annotations):
        cls = ann.cls
        if FINE_TO_KIND.get(cls.fine_label) != cls.kind:
            out.append(Violation(
                "kind-mapping",
                f"fine label {cls.fine_label.value} does not map to kind {cls.kind.value}",
                i,
            ))
        if element_kind_for(cls.fine_label) != cls.element_kind:
            out.append(Violation(
                "class-consistency",
                f"fine label {cls.fine_label.value} requires element kind "
                f"{element_kind_for(cls.fine_label).value}, got {cls.element_kind.value}",
                i,
            ))
        box = ann.box
        if box.w <= 0 or box.h <= 0 or box.x < 0 or box.y < 0:
            out.append(Violation(
                "box-bounds", f"degenerate or negative box {box}", i))
        elif box.x2 > width or box.y2 > height:
            out.append(Violation(
                "box-bounds",
                f"box {box} exceeds image dims {width}x{height}", i))
        if ann.line_index < 0:
            out.append(Violation("line-index", "line_index must be >= 0", i))
        elif ann.line_index > 0 and cls.element_kind != ElementKind.TEXT:
            out.append(Violation(
                "line-index",
                f"line_index > 0 on non-text annotation ({cls.element_kind.value})", i))
        if not ann.source_key and cls.element_kind != ElementKind.INPUT:
            out.append(Violation(
                "source-key",
                f"empty source_key on non-input annotation ({cls.fine_label.value})", i))
        if ann.source_key:
            dup_key = (ann.source_key, ann.line_index)
            if dup_key in seen:
                out.append(Violation(
                    "duplicate",
                    f"annotations {seen[dup_key]} and {i} share "
                    f"(source_key={ann.source_key}, line_index={ann.line_index})",
                    i,
                ))
            else:
                seen[dup_key] = i
    return out


# --- record serialization (schema: 1, one record per sample) ---

def sample_to_record(sample: AnnotatedSample) -> dict:
    return {
        "schema": RECORD_SCHEMA_VERSION,
        "sample_id": sample.sample_id.key,
        "image_ref": sample.image_ref,
        "layout_id": sample.layout_id,
        "variant_index": sample.variant_index,
        "config_seed": sample.config_seed,
        "fill_state": sample.fill_state,
        "image_dims": [sample.image_dims[0], sample.image_dims[1]],
        "annotations": [
            {
                "box": [a.box.x, a.box.y, a.box.w, a.box.h],
                "kind": a.cls.kind.value,
                "fine_label": a.cls.fine_label.value,
                "element_kind": a.cls.element_kind.value,
                "source_key": a.source_key,
                "line_index": a.line_index,
                "visibility": a.visibility.value,
            }
            for a in sample.annotations
        ],
    }


def record_to_sample(record: dict) -> AnnotatedSample:
    if record.get("schema") != RECORD_SCHEMA_VERSION:
        raise ValueError(f"unsupported record schema: {record.get('schema')!r}")
    anns = [
        Annotation(
            box=BBox(*entry["box"]),
            cls=AnnotationClass(
                Kind(entry["kind"]),
                FineLabel(entry["fine_label"]),
                ElementKind(entry["element_kind"]),
            ),
            source_key=entry["source_key"],
            line_index=entry["line_index"],
            visibility=Visibility(entry["visibility"]),
        )
        for entry in record["annotations"]
    ]
    return AnnotatedSample(
        image_ref=record["image_ref"],
        layout_id=record["layout_id"],
        config_seed=record["config_seed"],
        fill_state=record["fill_state"],
        annotations=anns,
        image_dims=(record["image_dims"][0], record["image_dims"][1]),
        variant_index=record["variant_index"],
    )


def dumps_canonical(obj) -> str:
    """Canonical JSON text: sorted keys, compact, newline-terminated."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n"


def write_record(sample: AnnotatedSample, path: str | Path) -> None:
    Path(path).write_text(dumps_canonical(sample_to_record(sample)), encoding="utf-8")


def read_record(path: str | Path) -> AnnotatedSample:
    return record_to_sample(json.loads(Path(path).read_text(encoding="utf-8")))
