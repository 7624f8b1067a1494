"""Annotation extraction over a simulated page layout.

Mirrors the in-page extractor script exactly: one raw record per
attributed element, value-matched per-line text boxes, border boxes for
inputs, content boxes for images, and 3x3 point-grid visibility analysis
(grid cell centers, hit = topmost element is the target or a descendant).
Payload schema is versioned `extractor: 1`.
"""

from __future__ import annotations

from ..htmldoc import Element
from ..templates import ANNOTATION_ATTRS, annotation_attr, normalize_fine_label
from .simdom import CHAR_W, LINE_H, PageLayout

EXTRACTOR_SCHEMA_VERSION = 1

GRID = 3  # occlusion sampling grid (3x3 cell centers)


def group_rects_into_lines(rects: list) -> list:
    """Group fractional rects into per-line union boxes.

    Two rects share a line iff their vertical overlap is at least 50% of
    the smaller height. Result is ordered top-to-bottom.
    """
    groups: list[list] = []
    for rect in sorted(rects, key=lambda r: (r[1], r[0])):
        placed = False
        for group in groups:
            gy1 = min(r[1] for r in group)
            gy2 = max(r[1] + r[3] for r in group)
            overlap = min(gy2, rect[1] + rect[3]) - max(gy1, rect[1])
            smaller = min(gy2 - gy1, rect[3])
            if smaller > 0 and overlap >= 0.5 * smaller:
                group.append(rect)
                placed = True
                break
        if not placed:
            groups.append([rect])
    out = []
    for group in groups:
        x1 = min(r[0] for r in group)
        y1 = min(r[1] for r in group)
        x2 = max(r[0] + r[2] for r in group)
        y2 = max(r[1] + r[3] for r in group)
        out.append([x1, y1, x2 - x1, y2 - y1])
    out.sort(key=lambda r: (r[1], r[0]))
    return out


def _char_rects(chars) -> list:
    return [[cx, cy, float(CHAR_W), float(LINE_H)] for _, cx, cy in chars]


def _value_match_rects(chars, value: str) -> list | None:
    """Rects of the characters spelling `value` inside the element text."""
    if not value or not chars:
        return None
    flat = "".join(c[0] for c in chars)
    start = flat.find(value)
    if start < 0:
        return None
    return _char_rects(chars[start:start + len(value)])


def _visibility(layout: PageLayout, box) -> tuple[str, list | None]:
    el = box.el
    hits = [[False] * GRID for _ in range(GRID)]
    n_hits = 0
    for row in range(GRID):
        for col in range(GRID):
            px = box.x + (col + 0.5) * box.w / GRID
            py = box.y + (row + 0.5) * box.h / GRID
            top = layout.hit_test(px, py)
            if top is not None and layout.is_descendant_or_self(top, el):
                hits[row][col] = True
                n_hits += 1
    if n_hits == GRID * GRID:
        return "full", None
    if n_hits == 0:
        return "occluded", None
    rows = [r for r in range(GRID) if any(hits[r])]
    cols = [c for c in range(GRID) if any(hits[r][c] for r in range(GRID))]
    r0, r1 = min(rows), max(rows)
    c0, c1 = min(cols), max(cols)
    clip = [
        box.x + c0 * box.w / GRID,
        box.y + r0 * box.h / GRID,
        (c1 - c0 + 1) * box.w / GRID,
        (r1 - r0 + 1) * box.h / GRID,
    ]
    return "clipped", clip


def extract_annotations(layout: PageLayout, values: dict) -> dict:
    """Raw annotation payload for every attributed element in the layout."""
    records = []
    errors = []
    for el in layout.root.iter():
        pair = annotation_attr(el)
        if pair is None:
            continue
        attr, raw_label = pair
        try:
            records.append(_record_for(layout, el, attr, raw_label, values))
        except Exception as exc:  # per-element isolation, never abort the page
            errors.append({"element": el.tag, "attr": attr, "error": str(exc)})
    return {
        "extractor": EXTRACTOR_SCHEMA_VERSION,
        "page": [float(layout.viewport_width), float(layout.page_height)],
        "records": records,
        "errors": errors,
    }


def _record_for(layout: PageLayout, el: Element, attr: str, raw_label: str,
                values: dict) -> dict:
    label = normalize_fine_label(attr, raw_label)
    box = layout.boxes.get(id(el))
    key = el.get("data-key", "")
    if el.tag in ("input", "select", "textarea"):
        element_kind = "input"
    elif el.tag == "img":
        element_kind = "image"
    else:
        element_kind = "text"
    record = {
        "key": key,
        "attr": attr,
        "label": label,
        "element": element_kind,
        "rects": [],
        "visibility": "occluded",
    }
    if box is None or box.hidden or box.w <= 0 or box.h <= 0:
        return record

    if element_kind == "text":
        chars = layout.chars_under(el)
        matched = _value_match_rects(chars, values.get(key, ""))
        base = matched if matched is not None else _char_rects(chars)
        rects = group_rects_into_lines(base) if base else [list(box.rect)]
    else:
        rects = [list(box.rect)]

    visibility, clip = _visibility(layout, box)
    record["visibility"] = visibility
    if visibility == "occluded":
        record["rects"] = []
        return record
    record["rects"] = rects
    if clip is not None:
        record["clip"] = clip
    return record


__all__ = [
    "EXTRACTOR_SCHEMA_VERSION",
    "extract_annotations",
    "group_rects_into_lines",
    "ANNOTATION_ATTRS",
]
