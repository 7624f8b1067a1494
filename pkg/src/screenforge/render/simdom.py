"""Deterministic layout simulator: the built-in page engine.

Lays out the constrained markup subset the templates use (block flow,
absolute positioning, inline text with fixed monospace metrics, explicit
px sizes, z-index stacking, display:none) and runs the same extraction
semantics as the in-page script: value matching against per-character
geometry, per-line box grouping by vertical overlap, and 3x3 point-grid
occlusion analysis. Exists so rendering is hermetic and reproducible on
machines without a browser; geometry, not pixels, is the contract shared
with the real-browser path.

Font metrics are fixed: 8px per character, 16px line height.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .. import htmldoc
from ..htmldoc import Element, Text

CHAR_W = 8
LINE_H = 16
INPUT_H = 24
INPUT_W = 200
IMG_DEFAULT = 100

_INLINE_TAGS = frozenset({"span", "a", "b", "i", "em", "strong", "small", "u", "code"})
_SKIP_TAGS = frozenset({"style", "script", "head", "title", "meta", "link"})

_PX_RE = re.compile(r"(-?\d+(?:\.\d+)?)px")


def _px(style: dict, prop: str):
    m = _PX_RE.fullmatch(style.get(prop, "").strip())
    return float(m.group(1)) if m else None


@dataclass
class LaidOut:
    """Geometry of one element: border box plus per-character text runs."""

    el: Element
    x: float = 0.0
    y: float = 0.0
    w: float = 0.0
    h: float = 0.0
    z: int = 0
    order: int = 0
    hidden: bool = False
    # characters this element's text occupies: (char, x, y) with LINE_H rows
    chars: list = field(default_factory=list)
    owns_runs: bool = False  # block element that laid out inline runs itself

    @property
    def rect(self) -> tuple[float, float, float, float]:
        return (self.x, self.y, self.w, self.h)

    def contains(self, px: float, py: float) -> bool:
        return self.x <= px < self.x + self.w and self.y <= py < self.y + self.h


class PageLayout:
    """Full layout of a document at a given viewport width."""

    def __init__(self, root: Element, viewport_width: int):
        self.root = root
        self.viewport_width = viewport_width
        self.boxes: dict[int, LaidOut] = {}  # id(el) -> geometry
        self._order = 0
        self.page_height = 0.0
        body = next((el for el in root.iter() if el.tag == "body"), root)
        flow_h = self._layout_block_children(
            body, 0.0, 0.0, float(viewport_width), z=0, cb=(0.0, 0.0))
        bottom = max((b.y + b.h for b in self.boxes.values() if not b.hidden),
                     default=0.0)
        self.page_height = max(flow_h, bottom)

    # --- layout ---

    def _note(self, el: Element, x, y, w, h, z) -> LaidOut:
        self._order += 1
        box = LaidOut(el=el, x=x, y=y, w=w, h=h, z=z, order=self._order)
        self.boxes[id(el)] = box
        return box

    def _mark_hidden(self, el: Element) -> None:
        for sub in el.iter():
            self._order += 1
            self.boxes[id(sub)] = LaidOut(el=sub, hidden=True, order=self._order)

    def _layout_block_children(self, el: Element, x, y, w, z, cb) -> float:
        """Stack el's children vertically; returns consumed flow height."""
        cursor = y
        inline_run: list = []

        def flush_run():
            nonlocal cursor
            if inline_run:
                cursor += self._layout_inline_run(list(inline_run), x, cursor, w, z)
                inline_run.clear()

        for child in el.children:
            if isinstance(child, Text):
                if child.data.strip():
                    inline_run.append(child)
                continue
            if not isinstance(child, Element) or child.tag in _SKIP_TAGS:
                continue
            if child.tag in _INLINE_TAGS and "position" not in child.style():
                inline_run.append(child)
                continue
            flush_run()
            cursor += self._layout_element(child, x, cursor, w, z, cb)
        flush_run()
        return cursor - y

    def _layout_element(self, el: Element, x, y, avail_w, z, cb) -> float:
        """Lay out one block-level element; returns flow height consumed.

        `cb` is the containing-block origin absolute positioning offsets
        are resolved against (nearest positioned ancestor, else the page).
        """
        style = el.style()
        if style.get("display") == "none":
            self._mark_hidden(el)
            return 0.0
        zi = style.get("z-index")
        z = int(zi) if zi and zi.lstrip("-").isdigit() else z
        position = style.get("position", "static")
        absolute = position == "absolute"
        left = _px(style, "left") or 0.0
        top = _px(style, "top") or 0.0
        if absolute:
            bx, by = cb[0] + left, cb[1] + top
            w = _px(style, "width")
            if w is None:
                w = max(avail_w - left, CHAR_W)
        else:
            bx, by = x, y
            w = _px(style, "width") or avail_w
        pad = _px(style, "padding") or 0.0
        child_cb = (bx, by) if position in ("absolute", "relative") else cb

        if el.tag in ("input", "select", "textarea"):
            h = _px(style, "height") or INPUT_H
            w = _px(style, "width") or INPUT_W
            self._note(el, bx, by, w, h, z)
            return 0.0 if absolute else h
        if el.tag == "img":
            w = _px(style, "width") or float(el.get("width") or IMG_DEFAULT)
            h = _px(style, "height") or float(el.get("height") or IMG_DEFAULT)
            self._note(el, bx, by, w, h, z)
            return 0.0 if absolute else h

        box = self._note(el, bx, by, w, 0.0, z)
        content_h = self._layout_block_children(
            el, bx + pad, by + pad, w - 2 * pad, z, child_cb)
        h = _px(style, "height")
        if h is None:
            h = content_h + 2 * pad
        box.w, box.h = w, h
        return 0.0 if absolute else h

    def _layout_inline_run(self, nodes, x, y, w, z) -> float:
        """Wrap an inline run into lines; records per-char geometry."""
        max_chars = max(int(w // CHAR_W), 1)
        # flatten to (word, owners) tokens; owners = inline elements covering it
        tokens: list = []
        for node in nodes:
            self._collect_tokens(node, (), tokens)
        line, col = 0, 0
        placed: list = []  # (char, col, line, owners)
        for word, owners in tokens:
            need = len(word) if col == 0 else len(word) + 1
            if col > 0 and col + need > max_chars:
                line, col = line + 1, 0
            if col > 0:
                placed.append((" ", col, line, owners))
                col += 1
            for ch in word:
                if col >= max_chars:
                    line, col = line + 1, 0
                placed.append((ch, col, line, owners))
                col += 1
        n_lines = line + 1 if placed else 0
        per_el: dict[int, list] = {}
        for ch, c, ln, owners in placed:
            cx, cy = x + c * CHAR_W, y + ln * LINE_H
            for el in owners:
                per_el.setdefault(id(el), []).append((ch, cx, cy))
        for node in nodes:
            if isinstance(node, Element):
                chars = per_el.get(id(node), [])
                box = self._bbox_of_chars(chars)
                laid = self._note(node, *box, z)
                laid.chars = chars
        # the nearest block ancestor owns every char of the run
        parent = nodes[0].parent if nodes else None
        if parent is not None and id(parent) in self.boxes:
            box = self.boxes[id(parent)]
            box.owns_runs = True
            box.chars.extend(
                (ch, x + c * CHAR_W, y + ln * LINE_H) for ch, c, ln, _ in placed)
        return n_lines * LINE_H

    def _collect_tokens(self, node, owners, out) -> None:
        if isinstance(node, Text):
            for word in node.data.split():
                out.append((word, owners))
            return
        if isinstance(node, Element):
            if node.style().get("display") == "none":
                self._mark_hidden(node)
                return
            new_owners = owners + (node,)
            for child in node.children:
                self._collect_tokens(child, new_owners, out)

    @staticmethod
    def _bbox_of_chars(chars) -> tuple[float, float, float, float]:
        if not chars:
            return (0.0, 0.0, 0.0, 0.0)
        xs = [c[1] for c in chars]
        ys = [c[2] for c in chars]
        x1, x2 = min(xs), max(xs) + CHAR_W
        y1, y2 = min(ys), max(ys) + LINE_H
        return (x1, y1, x2 - x1, y2 - y1)

    def chars_under(self, el: Element) -> list:
        """All text characters under an element, document order.

        Equivalent to walking the element's text nodes: concatenates the
        runs of self-or-descendant blocks that laid text out (inline
        boxes hold subsets of those runs, so they are skipped to avoid
        double counting); an inline element falls back to its own slice
        of the enclosing run.
        """
        chars: list = []
        for sub in el.iter():
            box = self.boxes.get(id(sub))
            if box is not None and box.owns_runs:
                chars.extend(box.chars)
        if not chars:
            own = self.boxes.get(id(el))
            if own is not None:
                return own.chars
        return chars

    # --- hit testing ---

    def hit_test(self, px: float, py: float):
        """Topmost visible element at a point: highest (z, doc order)."""
        best = None
        for box in self.boxes.values():
            if box.hidden or box.w <= 0 or box.h <= 0:
                continue
            if box.contains(px, py):
                if best is None or (box.z, box.order) >= (best.z, best.order):
                    best = box
        return best.el if best is not None else None

    def is_descendant_or_self(self, el: Element, ancestor: Element) -> bool:
        node = el
        while node is not None:
            if node is ancestor:
                return True
            node = node.parent
        return False
