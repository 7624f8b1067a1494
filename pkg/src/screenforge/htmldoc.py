"""Minimal mutable HTML document tree.

Just enough DOM for this pipeline: parse template markup, query and edit
elements, and re-serialize deterministically. Tag and attribute names are
normalized to lowercase; attribute order is preserved as written.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from html import escape
from html.parser import HTMLParser

VOID_TAGS = frozenset({
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "source", "track", "wbr",
})


class ParseError(Exception):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


@dataclass
class Text:
    data: str
    parent: "Element | None" = field(default=None, repr=False)


@dataclass
class Raw:
    """Verbatim markup (doctype declarations); serialized unescaped."""

    data: str
    parent: "Element | None" = field(default=None, repr=False)


@dataclass
class Element:
    tag: str
    attrs: dict = field(default_factory=dict)
    children: list = field(default_factory=list)
    parent: "Element | None" = field(default=None, repr=False)

    def append(self, child) -> None:
        child.parent = self
        self.children.append(child)

    def remove(self) -> None:
        if self.parent is not None:
            self.parent.children.remove(self)
            self.parent = None

    def get(self, name: str, default=None):
        return self.attrs.get(name, default)

    def set(self, name: str, value: str) -> None:
        self.attrs[name] = value

    def iter(self):
        """All descendant elements, self first, document order."""
        yield self
        for child in self.children:
            if isinstance(child, Element):
                yield from child.iter()

    def find_all(self, pred) -> list["Element"]:
        return [el for el in self.iter() if pred(el)]

    def text_content(self) -> str:
        parts = []
        for child in self.children:
            if isinstance(child, Text):
                parts.append(child.data)
            elif isinstance(child, Element):
                parts.append(child.text_content())
        return "".join(parts)

    def style(self) -> dict[str, str]:
        """Inline style as a property map."""
        out = {}
        for decl in self.get("style", "").split(";"):
            if ":" in decl:
                prop, val = decl.split(":", 1)
                out[prop.strip().lower()] = val.strip()
        return out


class _TreeBuilder(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.root = Element("#document")
        self.stack = [self.root]

    def handle_starttag(self, tag, attrs):
        el = Element(tag, {k: (v if v is not None else "") for k, v in attrs})
        self.stack[-1].append(el)
        if tag not in VOID_TAGS:
            self.stack.append(el)

    def handle_startendtag(self, tag, attrs):
        el = Element(tag, {k: (v if v is not None else "") for k, v in attrs})
        self.stack[-1].append(el)

    def handle_endtag(self, tag):
        if tag in VOID_TAGS:
            return
        line, col = self.getpos()
        if len(self.stack) == 1 or self.stack[-1].tag != tag:
            open_tags = [el.tag for el in self.stack[1:]]
            raise ParseError(
                f"mismatched </{tag}>; open elements: {open_tags}", line, col)
        self.stack.pop()

    def handle_data(self, data):
        if data:
            self.stack[-1].append(Text(data))

    def handle_decl(self, decl):
        self.stack[-1].append(Raw(f"<!{decl}>"))

    def close(self):
        super().close()
        if len(self.stack) != 1:
            raise ParseError(
                f"unclosed elements: {[el.tag for el in self.stack[1:]]}",
                *self.getpos())


def parse_html(source: str) -> Element:
    builder = _TreeBuilder()
    builder.feed(source)
    builder.close()
    return builder.root


_RAW_TEXT_TAGS = frozenset({"script", "style"})


def _serialize_into(node, out: list, raw_text: bool = False) -> None:
    if isinstance(node, Raw):
        out.append(node.data)
        return
    if isinstance(node, Text):
        out.append(node.data if raw_text else escape(node.data, quote=False))
        return
    if node.tag == "#document":
        for child in node.children:
            _serialize_into(child, out)
        return
    out.append(f"<{node.tag}")
    for name, value in node.attrs.items():
        out.append(f' {name}="{escape(value, quote=True)}"')
    out.append(">")
    if node.tag in VOID_TAGS:
        return
    for child in node.children:
        _serialize_into(child, out, raw_text=node.tag in _RAW_TEXT_TAGS)
    out.append(f"</{node.tag}>")


def serialize(node) -> str:
    out: list = []
    _serialize_into(node, out)
    return "".join(out)
