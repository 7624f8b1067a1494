"""Host-side finalization of raw extraction payloads into annotations.

Occluded records are dropped, clipped ones intersected with their visible
region, everything clamped to the image, fractional edges rounded
half-away-from-zero, classes resolved from the attribute family, and line
indexes assigned per source key in stable (y, x) order.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import Annotation, AnnotationClass, BBox, FineLabel, Visibility
from .render.extract import EXTRACTOR_SCHEMA_VERSION
from .templates import normalize_fine_label


class SchemaMismatch(Exception):
    pass


@dataclass(frozen=True)
class ClipRegion:
    x: float
    y: float
    w: float
    h: float

    def __post_init__(self):
        if self.w <= 0 or self.h <= 0:
            raise ValueError("degenerate clip region")


def _round_half_away(v: float) -> int:
    if v >= 0:
        return int(v + 0.5)
    return -int(-v + 0.5)


def _intersect(a, b):
    """Exact rectangle intersection of (x, y, w, h) pairs; None if empty."""
    x1 = max(a[0], b[0])
    y1 = max(a[1], b[1])
    x2 = min(a[0] + a[2], b[0] + b[2])
    y2 = min(a[1] + a[3], b[1] + b[3])
    if x2 <= x1 or y2 <= y1:
        return None
    return (x1, y1, x2 - x1, y2 - y1)


def clip_box(box, region):
    """Intersection of two rects; None iff the intersection has zero area."""
    return _intersect(tuple(box), tuple(region))


def _to_pixel_box(rect, image_dims) -> tuple[BBox, bool] | None:
    """Clamp to the image, then round edges half-away-from-zero.

    Returns (box, was_cut) or None when nothing remains inside the image.
    """
    clamped = _intersect(rect, (0.0, 0.0, float(image_dims[0]), float(image_dims[1])))
    if clamped is None:
        return None
    was_cut = clamped != tuple(rect)
    x1 = _round_half_away(clamped[0])
    y1 = _round_half_away(clamped[1])
    x2 = _round_half_away(clamped[0] + clamped[2])
    y2 = _round_half_away(clamped[1] + clamped[3])
    x1 = max(0, min(x1, image_dims[0]))
    y1 = max(0, min(y1, image_dims[1]))
    x2 = max(0, min(x2, image_dims[0]))
    y2 = max(0, min(y2, image_dims[1]))
    if x2 <= x1 or y2 <= y1:
        return None
    return BBox(x1, y1, x2 - x1, y2 - y1), was_cut


def finalize(raw_payload: dict, image_dims: tuple[int, int]) -> list[Annotation]:
    """Turn one extraction payload into finalized annotations."""
    if raw_payload.get("extractor") != EXTRACTOR_SCHEMA_VERSION:
        raise SchemaMismatch(
            f"payload version {raw_payload.get('extractor')!r}, "
            f"expected {EXTRACTOR_SCHEMA_VERSION}")

    staged = []  # (y, x, source_key, cls, box, was_clipped)
    for record in raw_payload.get("records", []):
        if record["visibility"] == "occluded":
            continue
        fine = FineLabel(normalize_fine_label(record["attr"], record["label"]))
        cls = AnnotationClass.for_fine(fine)
        clip = record.get("clip")
        for rect in record["rects"]:
            rect = tuple(float(v) for v in rect)
            clipped = False
            if clip is not None:
                cut = _intersect(rect, tuple(clip))
                if cut is None:
                    continue
                clipped = clipped or cut != rect
                rect = cut
            pixel = _to_pixel_box(rect, image_dims)
            if pixel is None:
                continue
            box, was_cut = pixel
            clipped = clipped or was_cut
            staged.append((box.y, box.x, record["key"], cls, box, clipped))

    staged.sort(key=lambda t: (t[0], t[1], t[2]))
    line_counters: dict[str, int] = {}
    seen_boxes: set = set()
    out: list[Annotation] = []
    for _, _, key, cls, box, clipped in staged:
        dedup = (key, cls.fine_label, box)
        if dedup in seen_boxes:
            continue
        seen_boxes.add(dedup)
        line_index = 0
        if cls.element_kind.value == "text":
            # same key rendered in several places keeps a single running
            # line order; uniqueness of (source_key, line_index) holds
            line_index = line_counters.get(key, 0)
            line_counters[key] = line_index + 1
        elif cls.element_kind.value == "input":
            # input records keep their bound key only in the raw payload;
            # the finalized annotation carries an empty source key
            key = ""
        out.append(Annotation(
            box=box, cls=cls, source_key=key, line_index=line_index,
            visibility=Visibility.CLIPPED if clipped else Visibility.FULL))
    return out
