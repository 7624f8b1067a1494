"""Built-in page engine: simulated layout plus a flat-shaded screenshot.

The raster is schematic (background fills, control outlines, text bars) —
downstream consumers treat images as opaque references, so geometry
fidelity and byte determinism are what matter here.
"""

from __future__ import annotations

import math

from .. import htmldoc
from .extract import extract_annotations
from .png import encode_rgb
from .simdom import CHAR_W, LINE_H, PageLayout

_NAMED_COLORS = {
    "white": (255, 255, 255), "black": (17, 17, 17), "red": (214, 69, 65),
    "pink": (240, 148, 184), "purple": (142, 98, 191), "grey": (200, 200, 200),
    "gray": (200, 200, 200), "lightgray": (226, 226, 226),
    "blue": (74, 108, 212), "green": (88, 160, 98), "yellow": (238, 207, 109),
    "orange": (229, 148, 73), "beige": (238, 230, 210),
    "lavender": (222, 216, 240),
}


def _parse_color(value: str):
    value = value.strip().lower()
    if value.startswith("#"):
        hexpart = value[1:]
        if len(hexpart) == 3:
            hexpart = "".join(ch * 2 for ch in hexpart)
        if len(hexpart) == 6:
            try:
                return tuple(int(hexpart[i:i + 2], 16) for i in (0, 2, 4))
            except ValueError:
                return None
    return _NAMED_COLORS.get(value)


class _Raster:
    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.buf = bytearray(b"\xff" * (width * height * 3))

    def fill(self, x, y, w, h, color) -> None:
        x1 = max(int(x), 0)
        y1 = max(int(y), 0)
        x2 = min(int(math.ceil(x + w)), self.width)
        y2 = min(int(math.ceil(y + h)), self.height)
        if x2 <= x1 or y2 <= y1:
            return
        row = bytes(color) * (x2 - x1)
        for yy in range(y1, y2):
            start = (yy * self.width + x1) * 3
            self.buf[start:start + len(row)] = row

    def outline(self, x, y, w, h, color) -> None:
        self.fill(x, y, w, 1, color)
        self.fill(x, y + h - 1, w, 1, color)
        self.fill(x, y, 1, h, color)
        self.fill(x + w - 1, y, 1, h, color)


def paint(layout: PageLayout, width: int, height: int) -> bytes:
    raster = _Raster(width, height)
    boxes = sorted(
        (b for b in layout.boxes.values() if not b.hidden and b.w > 0 and b.h > 0),
        key=lambda b: (b.z, b.order))
    for box in boxes:
        style = box.el.style()
        bg = style.get("background-color") or style.get("background", "")
        color = _parse_color(bg) if bg else None
        if color:
            raster.fill(box.x, box.y, box.w, box.h, color)
        if box.el.tag in ("input", "select", "textarea"):
            raster.fill(box.x, box.y, box.w, box.h, (252, 252, 252))
            raster.outline(box.x, box.y, box.w, box.h, (153, 153, 153))
            if box.el.get("value"):
                raster.fill(box.x + 4, box.y + box.h / 2 - 4,
                            min(len(box.el.get("value")) * CHAR_W, box.w - 8),
                            8, (51, 51, 51))
        elif box.el.tag == "img":
            raster.fill(box.x, box.y, box.w, box.h, (208, 208, 208))
        for _, cx, cy in box.chars:
            raster.fill(cx, cy + 4, CHAR_W, LINE_H - 8, (51, 51, 51))
    return encode_rgb(width, height, raster.buf)


class BuiltinEngine:
    """Deterministic engine used when no browser binary is configured."""

    name = "builtin"

    def render_page(self, document: str, viewport: tuple[int, int],
                    full_page: bool, values: dict, settings: dict | None = None):
        # fixed font metrics and no wall-clock reads make the recorded
        # determinism settings structural here
        root = htmldoc.parse_html(document)
        layout = PageLayout(root, viewport[0])
        payload = extract_annotations(layout, values)
        height = viewport[1]
        if full_page:
            height = max(int(math.ceil(layout.page_height)), viewport[1])
        image = paint(layout, viewport[0], height)
        return image, (viewport[0], height), payload

    def close(self) -> None:
        pass
