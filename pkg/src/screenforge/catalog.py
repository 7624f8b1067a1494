"""Product-record corpus: ingest/cleanup, similarity and sampling queries.

Records arrive as newline-delimited JSON (id, title, description, optional
brand/category/price, image path relative to the asset root). Ingest drops
unusable records, strips marketplace identifier tokens from titles and
backfills the brand from the title prefix when absent.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from random import Random


class AssetRootMissing(Exception):
    pass


class NoEligibleProduct(Exception):
    pass


@dataclass(frozen=True)
class ProductRecord:
    id: str
    title: str
    description: str = ""
    brand: str = ""
    image_ref: str = ""  # relative to asset root; empty for text-only items
    price_hint: int | None = None  # cents
    category: str = ""


@dataclass
class Catalog:
    records: list[ProductRecord]
    token_index: dict[str, set[int]] = field(default_factory=dict)

    def __post_init__(self):
        if not self.token_index:
            self.token_index = _build_index(self.records)

    def __len__(self) -> int:
        return len(self.records)


_TOKEN_RE = re.compile(r"[a-z0-9]+")

# Marketplace identifier tokens: 10-char uppercase alnum blocks containing a
# digit (ASIN-style) and explicit SKU/model tags.
_SITE_ID_RE = re.compile(r"\b(?=[A-Z0-9]{10}\b)(?=[A-Z0-9]*\d)[A-Z0-9]{10}\b")
_SKU_TAG_RE = re.compile(r"\b(?:SKU|ASIN|UPC|EAN)[:#]?\s*[A-Za-z0-9-]+\b", re.I)


def tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _build_index(records: list[ProductRecord]) -> dict[str, set[int]]:
    index: dict[str, set[int]] = {}
    for i, rec in enumerate(records):
        for tok in set(tokens(rec.title + " " + rec.description)):
            index.setdefault(tok, set()).add(i)
    return index


def clean_title(title: str) -> str:
    title = _SKU_TAG_RE.sub("", title)
    title = _SITE_ID_RE.sub("", title)
    return re.sub(r"\s{2,}", " ", title).strip(" ,-")


def brand_from_title(title: str) -> str:
    """Leading capitalized token run before the first comma.

    "365 Everyday Value, Fragrance Free Wipes" -> "365 Everyday Value".
    """
    head = title.split(",", 1)[0].strip()
    if not head or head == title.strip():
        return ""
    words = head.split()
    if len(words) > 6:
        return ""
    if all(w[0].isupper() or w[0].isdigit() for w in words):
        return head
    return ""


def _image_ok(rec_image: str, asset_root: Path) -> bool:
    if not rec_image:
        return True  # text-only records are kept
    if "placeholder" in Path(rec_image).name.lower():
        return False
    return (asset_root / rec_image).is_file()


def ingest(raw_records: list[dict], asset_root: str | Path) -> Catalog:
    """Clean raw records into a catalog.

    Drops empty titles and records whose image file is missing or a
    placeholder; strips site identifier tokens from titles; fills brand
    from the title prefix unless the input already carries one.
    """
    root = Path(asset_root)
    if not root.is_dir():
        raise AssetRootMissing(f"asset root not readable: {root}")
    kept: list[ProductRecord] = []
    for raw in raw_records:
        title = clean_title(str(raw.get("title", "")))
        if not title:
            continue
        image_ref = raw.get("image", raw.get("image_ref", "")) or ""
        if not _image_ok(image_ref, root):
            continue
        brand = raw.get("brand") or brand_from_title(title)
        price = raw.get("price")
        kept.append(ProductRecord(
            id=str(raw.get("id", f"rec{len(kept)}")),
            title=title,
            description=str(raw.get("description", "")),
            brand=brand,
            image_ref=image_ref,
            price_hint=int(price) if price is not None else None,
            category=str(raw.get("category", "")),
        ))
    return Catalog(records=kept)


def load_catalog(path: str | Path, asset_root: str | Path) -> Catalog:
    raw = [json.loads(line) for line in Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
    return ingest(raw, asset_root)


def similarity(a: ProductRecord, b: ProductRecord) -> float:
    """Cosine similarity over lowercased token multisets of title+description."""
    ca = Counter(tokens(a.title + " " + a.description))
    cb = Counter(tokens(b.title + " " + b.description))
    dot = sum(ca[t] * cb[t] for t in ca.keys() & cb.keys())
    if dot == 0:
        return 0.0
    na = math.sqrt(sum(v * v for v in ca.values()))
    nb = math.sqrt(sum(v * v for v in cb.values()))
    return dot / (na * nb)


def similar(catalog: Catalog, query: ProductRecord, k: int) -> list[ProductRecord]:
    """Top-k records by token cosine, excluding the query record itself."""
    if k < 1:
        raise ValueError("k must be >= 1")
    candidates: set[int] = set()
    for tok in set(tokens(query.title + " " + query.description)):
        candidates |= catalog.token_index.get(tok, set())
    scored = []
    for i in sorted(candidates):
        rec = catalog.records[i]
        if rec.id == query.id:
            continue
        score = similarity(query, rec)
        if score > 0:
            scored.append((-score, rec.id, rec))
    scored.sort(key=lambda t: (t[0], t[1]))
    return [rec for _, _, rec in scored[:k]]


def eligible_records(catalog: Catalog, category: str | None = None) -> list[ProductRecord]:
    """Records matching the constraint, in ascending-id order."""
    recs = catalog.records if category is None else [
        r for r in catalog.records if r.category == category]
    return sorted(recs, key=lambda r: r.id)


def sample(catalog: Catalog, rng: Random, category: str | None = None) -> ProductRecord:
    """Uniform draw over eligible records using the supplied generator."""
    recs = eligible_records(catalog, category)
    if not recs:
        raise NoEligibleProduct(f"no record matches category={category!r}")
    return recs[rng.randrange(len(recs))]
