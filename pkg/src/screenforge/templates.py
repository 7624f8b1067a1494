"""Layout templates: parsing, validation, and instantiation.

A template bundle is a directory `layouts/<layout_id>/` holding:

  page.html    static markup with `{{KEY}}` placeholders; every element
               rendering a sensitive value carries exactly one annotation
               attribute data-pii|data-product|data-order="<fine_label>";
               form controls additionally carry data-field="<field_id>";
               optional blocks are wrapped in data-optional="<unit_id>".
  layout.meta  JSON: brand, page_type, ordered field descriptors, and the
               data spec (optional units + inclusion probability,
               extracted constants, identifier format templates).

Instantiation substitutes placeholders with config values, removes the
optional blocks a config excluded, applies a form fill state, and stamps
each annotated element with the config key it renders (`data-key`), which
is what lets the extractor match values to pixels later.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from . import configgen, htmldoc
from .configgen import (
    DataConfig,
    IdFormatTemplate,
    ImageRef,
    LayoutDataSpec,
    display,
    value_from_json,
)
from .htmldoc import Element, ParseError, Text

PAGE_TYPES = frozenset({
    "account_dashboard", "account_selection", "order_history", "order_tracking",
    "checkout", "cart", "added_to_cart", "billing_address", "billing_payment",
    "payment_entry", "delivery_options", "shipping", "customer_info",
    "address_validator", "gifting", "store_pickup", "product", "review",
    "receipt",
})

ANNOTATION_ATTRS = ("data-pii", "data-product", "data-order")

# attribute vocabulary normalization: family attr value -> canonical fine label
_ATTR_VOCAB = {
    "data-pii": {
        "name": "name", "address": "address", "contact": "contact",
        "payment": "payment", "other": "other_pii", "other_pii": "other_pii",
        "input": "input_field", "input_field": "input_field",
    },
    "data-product": {
        "text": "product_text", "product_text": "product_text",
        "name": "product_text", "title": "product_text",
        "image": "product_image", "product_image": "product_image",
    },
    "data-order": {
        "info": "order_info", "order_info": "order_info", "": "order_info",
    },
}

PLACEHOLDER_RE = re.compile(r"\{\{([A-Z][A-Z0-9_]*)\}\}")
_LEFTOVER_RE = re.compile(r"\{\{[^}]*\}\}")


class UnknownAttribute(ParseError):
    pass


class MissingKey(Exception):
    pass


class FillMismatch(Exception):
    pass


@dataclass(frozen=True)
class FieldDescriptor:
    field_id: str
    input_kind: str  # text | dropdown | checkbox
    bound_key: str
    placeholder_text: str = ""
    optional: bool = False
    fill_order: int = 1


@dataclass
class LayoutTemplate:
    layout_id: str
    brand: str
    page_type: str
    markup: str
    fields: list[FieldDescriptor]
    data_spec: LayoutDataSpec
    base_dir: Path | None = None
    placeholder_keys: frozenset[str] = frozenset()

    @property
    def n_fields(self) -> int:
        return len(self.fields)

    def fields_by_order(self) -> list[FieldDescriptor]:
        return sorted(self.fields, key=lambda f: f.fill_order)


@dataclass(frozen=True)
class Issue:
    code: str
    message: str


def annotation_attr(el: Element) -> tuple[str, str] | None:
    """(family attr, raw value) if the element carries one."""
    for name in ANNOTATION_ATTRS:
        if name in el.attrs:
            return name, el.attrs[name]
    return None


def normalize_fine_label(attr: str, raw: str, pos: str = "") -> str:
    vocab = _ATTR_VOCAB[attr]
    label = vocab.get(raw.strip().lower())
    if label is None:
        raise UnknownAttribute(f"unrecognized {attr}={raw!r} {pos}".strip())
    return label


def _data_spec_from_meta(meta: dict, required: frozenset[str]) -> LayoutDataSpec:
    spec_meta = meta.get("data_spec", {})
    constants = {
        key: value_from_json(obj)
        for key, obj in spec_meta.get("extracted_constants", {}).items()
    }
    id_formats = {}
    for key, obj in spec_meta.get("id_formats", {}).items():
        charsets = obj.get("charsets")
        if charsets:
            id_formats[key] = IdFormatTemplate(
                obj["pattern"], tuple(sorted(charsets.items())))
        else:
            id_formats[key] = IdFormatTemplate(obj["pattern"])
    return LayoutDataSpec(
        required_keys=required | frozenset(spec_meta.get("extra_keys", [])),
        optional_field_ids=frozenset(spec_meta.get("optional_field_ids", [])),
        optional_p=spec_meta.get("optional_p", 0.5),
        extracted_constants=constants,
        id_formats=id_formats,
    )


def parse_template(markup: str, meta: dict, layout_id: str,
                   base_dir: Path | None = None) -> LayoutTemplate:
    """Parse and structurally check a template bundle."""
    root = htmldoc.parse_html(markup)

    for el in root.iter():
        pair = annotation_attr(el)
        if pair:
            normalize_fine_label(pair[0], pair[1], pos=f"on <{el.tag}>")

    fields = []
    for f in meta.get("fields", []):
        kind = f["input_kind"]
        if kind not in ("text", "dropdown", "checkbox"):
            raise ParseError(f"unknown input_kind {kind!r} for field {f['field_id']!r}")
        fields.append(FieldDescriptor(
            field_id=f["field_id"], input_kind=kind, bound_key=f["bound_key"],
            placeholder_text=f.get("placeholder_text", ""),
            optional=bool(f.get("optional", False)),
            fill_order=int(f["fill_order"])))

    orders: dict[int, str] = {}
    for f in fields:
        if f.fill_order in orders:
            raise ParseError(
                f"duplicate fill_order {f.fill_order}: fields "
                f"{orders[f.fill_order]!r} and {f.field_id!r}")
        orders[f.fill_order] = f.field_id
    if fields and sorted(orders) != list(range(1, len(fields) + 1)):
        raise ParseError(
            f"fill_order values {sorted(orders)} are not a permutation of "
            f"1..{len(fields)}")

    markup_field_ids = {el.get("data-field") for el in root.iter()
                        if el.get("data-field")}
    declared = {f.field_id for f in fields}
    if markup_field_ids != declared:
        raise ParseError(
            f"field descriptors and data-field markers disagree: "
            f"meta={sorted(declared)} markup={sorted(markup_field_ids)}")

    page_type = meta.get("page_type", "product")
    if page_type not in PAGE_TYPES:
        raise ParseError(f"unknown page_type {page_type!r}")

    placeholders = frozenset(PLACEHOLDER_RE.findall(markup))
    required = placeholders | {f.bound_key for f in fields}
    return LayoutTemplate(
        layout_id=layout_id,
        brand=meta.get("brand", ""),
        page_type=page_type,
        markup=markup,
        fields=fields,
        data_spec=_data_spec_from_meta(meta, required),
        base_dir=base_dir,
        placeholder_keys=placeholders,
    )


def load_template(bundle_dir: str | Path) -> LayoutTemplate:
    bundle = Path(bundle_dir)
    markup = (bundle / "page.html").read_text(encoding="utf-8")
    meta = json.loads((bundle / "layout.meta").read_text(encoding="utf-8"))
    return parse_template(markup, meta, layout_id=bundle.name, base_dir=bundle)


# --- validation ---

_EMAIL_RE = re.compile(r"\b[\w.+-]+@[\w-]+\.[\w.]+\b")
_PHONE_RE = re.compile(r"\(\d{3}\)\s*\d{3}-\d{4}|\b\d{3}-\d{3}-\d{4}\b")
_LONG_DIGITS_RE = re.compile(r"\b(?:\d[ -]?){12,19}\b")
_SSN_RE = re.compile(r"\b\d{3}-\d{2}-\d{4}\b")


def _pii_like(text: str) -> str | None:
    for name, rx in (("email", _EMAIL_RE), ("phone", _PHONE_RE),
                     ("card-number", _LONG_DIGITS_RE), ("ssn", _SSN_RE)):
        m = rx.search(text)
        if m:
            return f"{name}: {m.group(0)!r}"
    return None


def validate_template(t: LayoutTemplate) -> list[Issue]:
    """Flag hardcoded PII, unattributed placeholders, unknown keys and
    pre-selected dropdowns. Returns [] for a clean template."""
    issues: list[Issue] = []
    root = htmldoc.parse_html(t.markup)

    for el in root.iter():
        if el.tag in ("style", "script"):
            continue
        for child in el.children:
            if isinstance(child, Text):
                stripped = PLACEHOLDER_RE.sub(" ", child.data)
                hit = _pii_like(stripped)
                if hit:
                    issues.append(Issue(
                        "hardcoded-pii",
                        f"literal sensitive value in <{el.tag}> ({hit})"))

    def enclosing_annotation(el: Element) -> bool:
        node = el
        while node is not None and node.tag != "#document":
            if annotation_attr(node):
                return True
            node = node.parent
        return False

    for el in root.iter():
        texts = "".join(c.data for c in el.children if isinstance(c, Text))
        keys = PLACEHOLDER_RE.findall(texts)
        attr_keys = [k for v in el.attrs.values() for k in PLACEHOLDER_RE.findall(v)]
        for key in keys + attr_keys:
            if not enclosing_annotation(el):
                issues.append(Issue(
                    "missing-attribute",
                    f"placeholder {{{{{key}}}}} has no enclosing annotation attribute"))

    for key in sorted(t.data_spec.required_keys):
        if not configgen_has_rule(key, t.data_spec):
            issues.append(Issue("unknown-key", f"no generation rule for {{{{{key}}}}}"))

    for el in root.iter():
        if el.tag != "select":
            continue
        options = [c for c in el.children if isinstance(c, Element) and c.tag == "option"]
        if not any(opt.get("value", "") == "" for opt in options):
            issues.append(Issue(
                "dropdown-hardcoded",
                f"<select data-field={el.get('data-field')!r}> lacks an "
                "unselected placeholder option"))
        for opt in options:
            if "selected" in opt.attrs and opt.get("value", "") != "":
                issues.append(Issue(
                    "dropdown-hardcoded",
                    f"<select data-field={el.get('data-field')!r}> is "
                    f"pre-selected to {opt.get('value')!r}"))
    return issues


def configgen_has_rule(key: str, spec: LayoutDataSpec) -> bool:
    probe = LayoutDataSpec(
        required_keys=frozenset({key}),
        extracted_constants=spec.extracted_constants,
        id_formats=spec.id_formats)
    try:
        configgen.generate_config(probe, None, 0, "probe", 0)
    except configgen.MissingGenerator:
        return False
    except configgen.NoEligibleProduct:
        return True  # product keys have a rule; they just need a catalog
    return True


# --- instantiation ---

def _resolve_asset(ref: str, base: Path | None) -> str:
    if not ref or ref.startswith(("http://", "https://", "data:", "file://", "/")):
        return ref
    if base is None:
        return ref
    return (base / ref).resolve().as_uri()


def instantiate(t: LayoutTemplate, config: DataConfig, fill,
                asset_root: Path | None = None) -> str:
    """Render the template into a self-contained document string.

    `fill` is a FillState (fillplan module); its per-field entries are
    applied to the form controls. Placeholders are substituted with the
    config's display strings; the annotated ancestor of each substitution
    is stamped with data-key so extraction can match value to geometry.
    """
    root = htmldoc.parse_html(t.markup)
    by_field = {f.field_id: f for f in t.fields}
    for fid in fill.per_field:
        if fid not in by_field:
            raise FillMismatch(f"fill references unknown field {fid!r}")

    for el in root.find_all(lambda e: e.get("data-optional")):
        if el.get("data-optional") not in config.included_optional_fields:
            el.remove()

    def stamp(el: Element, key: str) -> None:
        node = el
        while node is not None and node.tag != "#document":
            if annotation_attr(node):
                if "data-key" not in node.attrs:
                    node.set("data-key", key)
                return
            node = node.parent

    def substitute(match: re.Match, el: Element) -> str:
        key = match.group(1)
        if key not in config.values:
            raise MissingKey(key)
        stamp(el, key)
        value = config.values[key]
        if isinstance(value, ImageRef):
            return _resolve_asset(value.path, asset_root)
        return display(value)

    for el in list(root.iter()):
        for child in el.children:
            if isinstance(child, Text) and "{{" in child.data:
                child.data = PLACEHOLDER_RE.sub(
                    lambda m: substitute(m, el), child.data)
        for name, val in list(el.attrs.items()):
            if "{{" in val:
                el.attrs[name] = PLACEHOLDER_RE.sub(
                    lambda m: substitute(m, el), val)
        if el.tag == "img" and el.get("src"):
            el.set("src", _resolve_asset(el.get("src"), t.base_dir))

    for el in root.find_all(lambda e: e.get("data-field")):
        fd = by_field[el.get("data-field")]
        state = fill.per_field.get(fd.field_id, "empty")
        _apply_field_state(el, fd, state, config)

    out = htmldoc.serialize(root)
    leftover = _LEFTOVER_RE.findall(out)
    if leftover:
        raise MissingKey(f"unsubstituted placeholders: {leftover}")
    return out


def _field_value(fd: FieldDescriptor, config: DataConfig) -> str:
    if fd.bound_key not in config.values:
        raise MissingKey(fd.bound_key)
    return display(config.values[fd.bound_key])


def _apply_field_state(el: Element, fd: FieldDescriptor, state, config) -> None:
    """state is 'empty', 'full' or ('prefix', cut_length)."""
    if fd.bound_key:
        el.set("data-key", fd.bound_key)
    if el.tag == "select":
        for opt in [c for c in el.children
                    if isinstance(c, Element) and c.tag == "option"]:
            opt.attrs.pop("selected", None)
        if state == "full":  # dropdowns are atomic: selected or untouched
            value = _field_value(fd, config)
            target = next(
                (c for c in el.children if isinstance(c, Element)
                 and c.tag == "option" and c.get("value") == value), None)
            if target is None:
                target = Element("option", {"value": value})
                target.append(Text(value))
                el.append(target)
            target.set("selected", "")
        return
    if el.tag == "input" and el.get("type") == "checkbox":
        el.attrs.pop("checked", None)
        if state == "full":
            el.set("checked", "")
        return
    # text-like input
    if fd.placeholder_text:
        el.set("placeholder", fd.placeholder_text)
    el.attrs.pop("value", None)
    if state == "full":
        el.set("value", _field_value(fd, config))
    elif isinstance(state, tuple) and state[0] == "prefix":
        el.set("value", _field_value(fd, config)[:state[1]])


def read_fill_back(document: str, t: LayoutTemplate) -> dict[str, str]:
    """Observed per-field value map of an instantiated document.

    Used to verify fill-state invariants on rendered output: returns
    field_id -> entered value ('' when untouched).
    """
    root = htmldoc.parse_html(document)
    observed: dict[str, str] = {}
    for el in root.find_all(lambda e: e.get("data-field")):
        fid = el.get("data-field")
        if el.tag == "select":
            chosen = [c for c in el.children if isinstance(c, Element)
                      and c.tag == "option" and "selected" in c.attrs]
            observed[fid] = chosen[0].get("value", "") if chosen else ""
        elif el.get("type") == "checkbox":
            observed[fid] = "on" if "checked" in el.attrs else ""
        else:
            observed[fid] = el.get("value", "")
    return observed
