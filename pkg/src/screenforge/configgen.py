"""Seeded data-injection configs: synthetic identities, product picks,
platform-formatted identifiers, and render-time derived money values.

Every value is a pure function of (master seed, layout id, variant index)
plus the catalog contents. High-entropy values (names, street lines,
emails, phones, cards, formatted ids, product titles, gift messages) are
drawn through per-layout index permutations over their value spaces, so a
pool partition (one slot per layout) makes them disjoint across layouts —
that is what keeps train/test splits leakage-free at any split choice.

Key vocabulary (generation rules resolve on key names):
  PII_FULLNAME / PII_FIRSTNAME / PII_LASTNAME / PII_EMAIL / PII_PHONE
  PII_STREET / PII_CITY / PII_STATE / PII_ZIP
  PII_CARD / PII_CARD_LAST4 / PII_CVV / PII_CARD_EXPIRY
  PII_GIFT_RECIPIENT / GIFT_MESSAGE
  ORDER_DATE / ORDER_DELIVERY_DATE
  ORDER_ID / TRACKING_NUMBER          (format templates, overridable)
  PRODUCT<i>_NAME|_BRAND|_DESCRIPTION|_IMAGE|_PRICE|_QTY|_RATING|_REVIEWS
  SHIPPING_COST / TAX_RATE            (per-layout extracted constants)
  ORDER_SUBTOTAL / TAX / ORDER_TOTAL  (derived, exact integer cents)

Randomized ranges: price $1.99-$199.99, rating 3.0-5.0 step 0.1, review
count 1-50000, quantity 1-3.
"""

from __future__ import annotations

import datetime as dt
import json
import math
import re
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal
from functools import lru_cache
from hashlib import blake2b
from importlib import resources
from pathlib import Path
from random import Random

from .catalog import Catalog, NoEligibleProduct, eligible_records


class MissingGenerator(Exception):
    pass


class BadPattern(Exception):
    pass


class NegativeAmount(Exception):
    pass


# --- typed values ---

@dataclass(frozen=True)
class Money:
    cents: int

    def __str__(self) -> str:
        sign = "-" if self.cents < 0 else ""
        c = abs(self.cents)
        return f"{sign}{c // 100}.{c % 100:02d}"


@dataclass(frozen=True)
class Rate:
    value: Decimal  # e.g. Decimal("0.0825")

    def __str__(self) -> str:
        pct = (self.value * 100).normalize()
        return f"{pct:f}%"


@dataclass(frozen=True)
class ImageRef:
    path: str

    def __str__(self) -> str:
        return self.path


_MONTHS = ["January", "February", "March", "April", "May", "June", "July",
           "August", "September", "October", "November", "December"]


def display(value) -> str:
    """Rendered string for a config value, as substituted into markup."""
    if isinstance(value, dt.date):
        return f"{_MONTHS[value.month - 1]} {value.day}, {value.year}"
    if isinstance(value, int):
        return f"{value:,}" if value >= 10000 else str(value)
    return str(value)


def value_to_json(value) -> dict:
    if isinstance(value, Money):
        return {"t": "money", "v": value.cents}
    if isinstance(value, Rate):
        return {"t": "rate", "v": str(value.value)}
    if isinstance(value, ImageRef):
        return {"t": "img", "v": value.path}
    if isinstance(value, dt.date):
        return {"t": "date", "v": value.isoformat()}
    if isinstance(value, int):
        return {"t": "int", "v": value}
    return {"t": "str", "v": str(value)}


def value_from_json(obj: dict):
    tag, v = obj["t"], obj["v"]
    if tag == "money":
        return Money(v)
    if tag == "rate":
        return Rate(Decimal(v))
    if tag == "img":
        return ImageRef(v)
    if tag == "date":
        return dt.date.fromisoformat(v)
    if tag == "int":
        return int(v)
    return str(v)


# --- word pools ---

@lru_cache(maxsize=None)
def _pool(name: str) -> tuple[str, ...]:
    text = resources.files("screenforge.data").joinpath(name).read_text("utf-8")
    return tuple(line for line in text.splitlines() if line.strip())


def _first_names():
    return _pool("first_names.txt")


def _last_names():
    return _pool("last_names.txt")


# --- deterministic index machinery ---

def stable_seed(*parts) -> int:
    """64-bit seed from a tuple of parts; stable across runs and platforms."""
    h = blake2b(":".join(str(p) for p in parts).encode("utf-8"), digest_size=8)
    return int.from_bytes(h.digest(), "big")


def _stream(seed: int, name: str) -> Random:
    return Random(stable_seed(seed, name))


@dataclass(frozen=True)
class PoolPartition:
    """Restricts index draws to indices ≡ slot (mod total)."""

    slot: int = 0
    total: int = 1

    def slice_count(self, space: int) -> int:
        if self.slot >= space:
            return 0
        return (space - self.slot + self.total - 1) // self.total

    def to_global(self, i: int) -> int:
        return self.slot + self.total * i


WHOLE = PoolPartition()


class _IndexPerm:
    """Affine bijection over range(count): distinct draws per position."""

    def __init__(self, count: int, rng: Random):
        self.count = max(count, 1)
        if self.count == 1:
            self.offset, self.stride = 0, 1
            return
        self.offset = rng.randrange(self.count)
        stride = rng.randrange(1, self.count)
        while math.gcd(stride, self.count) != 1:
            stride = rng.randrange(1, self.count)
        self.stride = stride

    def __call__(self, pos: int) -> int:
        return (self.offset + self.stride * pos) % self.count


# --- platform identifier format templates ---

DIGITS = "0123456789"
UPPER = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
DEFAULT_CHARSETS = {"#": DIGITS, "@": UPPER}


@dataclass(frozen=True)
class IdFormatTemplate:
    pattern: str
    charsets: tuple[tuple[str, str], ...] = tuple(sorted(DEFAULT_CHARSETS.items()))

    def __post_init__(self):
        if not self.pattern:
            raise BadPattern("empty pattern")
        for wc, cs in self.charsets:
            if len(wc) != 1:
                raise BadPattern(f"wildcard must be one character: {wc!r}")
            if not cs:
                raise BadPattern(f"empty charset for wildcard {wc!r}")

    @property
    def charset_map(self) -> dict[str, str]:
        return dict(self.charsets)

    def space(self) -> int:
        """Number of distinct expansions."""
        cs = self.charset_map
        n = 1
        for ch in self.pattern:
            if ch in cs:
                n *= len(cs[ch])
        return n

    def expand(self, index: int) -> str:
        """Mixed-radix decode of an expansion index; literals preserved."""
        cs = self.charset_map
        out = []
        for ch in reversed(self.pattern):
            if ch in cs:
                chars = cs[ch]
                index, r = divmod(index, len(chars))
                out.append(chars[r])
            else:
                out.append(ch)
        return "".join(reversed(out))


def format_id(template: IdFormatTemplate, seed: int,
              partition: PoolPartition = WHOLE) -> str:
    """Deterministic expansion of a format template from a seed."""
    space = template.space()
    count = partition.slice_count(space)
    if count == 0:
        raise BadPattern(
            f"pattern space {space} too small for partition {partition}")
    idx = partition.to_global(Random(seed).randrange(count))
    return template.expand(idx)


DEFAULT_ID_FORMATS = {
    "ORDER_ID": IdFormatTemplate("###-#######-#######"),
    "TRACKING_NUMBER": IdFormatTemplate("1Z@@@##########"),
}


# --- layout data spec ---

@dataclass
class LayoutDataSpec:
    required_keys: frozenset[str] = frozenset()
    optional_field_ids: frozenset[str] = frozenset()
    optional_p: float = 0.5
    extracted_constants: dict = field(default_factory=dict)  # key -> Value
    id_formats: dict = field(default_factory=dict)  # key -> IdFormatTemplate

    def __post_init__(self):
        self.required_keys = frozenset(self.required_keys)
        self.optional_field_ids = frozenset(self.optional_field_ids)
        if not 0.0 <= self.optional_p <= 1.0:
            raise ValueError(f"optional_p out of range: {self.optional_p}")
        for key, value in self.extracted_constants.items():
            if isinstance(value, Money) and value.cents < 0:
                raise ValueError(f"negative extracted constant {key}")
            if isinstance(value, Rate) and not Decimal(0) <= value.value <= Decimal("0.25"):
                raise ValueError(f"tax rate out of [0, 0.25]: {key}={value.value}")

    def id_template(self, key: str) -> IdFormatTemplate | None:
        return self.id_formats.get(key) or DEFAULT_ID_FORMATS.get(key)


@dataclass
class DataConfig:
    seed: int
    values: dict = field(default_factory=dict)  # key -> Value
    included_optional_fields: frozenset[str] = frozenset()
    provenance: dict = field(default_factory=dict)  # key -> str

    def display(self, key: str) -> str:
        return display(self.values[key])

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "seed": self.seed,
            "values": {k: value_to_json(v) for k, v in sorted(self.values.items())},
            "included_optional_fields": sorted(self.included_optional_fields),
            "provenance": dict(sorted(self.provenance.items())),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DataConfig":
        return cls(
            seed=obj["seed"],
            values={k: value_from_json(v) for k, v in obj["values"].items()},
            included_optional_fields=frozenset(obj["included_optional_fields"]),
            provenance=dict(obj["provenance"]),
        )


def write_config(config: DataConfig, path: str | Path) -> None:
    text = json.dumps(config.to_json(), sort_keys=True, indent=1, ensure_ascii=False) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def read_config(path: str | Path) -> DataConfig:
    return DataConfig.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


# --- derived money values ---

_PRICE_RE = re.compile(r"^PRODUCT(\d+)_PRICE$")


def _as_cents(value) -> int:
    if isinstance(value, Money):
        return value.cents
    if isinstance(value, int):
        return value
    raise TypeError(f"expected money value, got {value!r}")


def derive_values(values: dict, spec: LayoutDataSpec | None = None) -> dict:
    """Recompute ORDER_SUBTOTAL / TAX / ORDER_TOTAL in exact integer cents.

    subtotal = Σ priceᵢ·qtyᵢ; tax = half-even(subtotal·rate) applied to the
    subtotal only; total = subtotal + shipping + tax. Idempotent: derived
    keys are overwritten from their inputs every time.
    """
    items = []
    for key, value in values.items():
        m = _PRICE_RE.match(key)
        if not m:
            continue
        qty = values.get(f"PRODUCT{m.group(1)}_QTY", 1)
        if not isinstance(qty, int):
            qty = int(str(qty))
        items.append((_as_cents(value), qty))
    shipping = _as_cents(values.get("SHIPPING_COST", Money(0)))
    rate = values.get("TAX_RATE", Rate(Decimal(0)))
    rate_dec = rate.value if isinstance(rate, Rate) else Decimal(str(rate))
    if shipping < 0 or rate_dec < 0 or any(p < 0 or q < 0 for p, q in items):
        raise NegativeAmount("negative price, quantity, shipping or tax rate")
    subtotal = sum(p * q for p, q in items)
    tax = int((Decimal(subtotal) * rate_dec).quantize(Decimal(1), rounding=ROUND_HALF_EVEN))
    out = dict(values)
    out["ORDER_SUBTOTAL"] = Money(subtotal)
    out["TAX"] = Money(tax)
    out["ORDER_TOTAL"] = Money(subtotal + shipping + tax)
    return out


# --- key classification ---

_PRODUCT_KEY_RE = re.compile(r"^PRODUCT(\d+)_([A-Z0-9]+)$")

DERIVED_KEYS = {"ORDER_SUBTOTAL", "TAX", "ORDER_TOTAL"}

_IDENTITY_KEYS = {
    "PII_FULLNAME", "PII_FIRSTNAME", "PII_LASTNAME", "PII_EMAIL", "PII_PHONE",
    "PII_STREET", "PII_CITY", "PII_STATE", "PII_ZIP",
    "PII_CARD", "PII_CARD_LAST4", "PII_CVV", "PII_CARD_EXPIRY",
    "PII_GIFT_RECIPIENT", "GIFT_MESSAGE", "ORDER_DATE", "ORDER_DELIVERY_DATE",
}


def is_leakage_sensitive(key: str) -> bool:
    """High-entropy injected values the leakage check must compare.

    Low-cardinality values (dates, cities, states, prices, ratings) are
    exempt: they legitimately repeat across layouts.
    """
    if key in {"PII_FULLNAME", "PII_EMAIL", "PII_PHONE", "PII_STREET",
               "PII_CARD", "PII_GIFT_RECIPIENT", "GIFT_MESSAGE"}:
        return True
    if key in DEFAULT_ID_FORMATS:
        return True
    m = _PRODUCT_KEY_RE.match(key)
    if m and m.group(2) in {"NAME", "DESCRIPTION"}:
        return True
    return False


def leakage_values(config: DataConfig, spec: LayoutDataSpec | None = None) -> set[str]:
    """Normalized sensitive value strings of a config."""
    keys = set(config.values)
    out = set()
    for key in keys:
        sensitive = is_leakage_sensitive(key) or (
            spec is not None and key in spec.id_formats)
        if sensitive:
            out.add(normalize_value(display(config.values[key])))
    return out


def normalize_value(text: str) -> str:
    return " ".join(text.casefold().split())


# --- the generator ---

def config_seed(master_seed: int, layout_id: str, variant_index: int) -> int:
    return stable_seed(master_seed, layout_id, variant_index)


class _LayoutDraws:
    """Per-layout permutations; position = variant*width + key slot."""

    def __init__(self, master_seed: int, layout_id: str, partition: PoolPartition):
        self.layout_seed = stable_seed(master_seed, layout_id)
        self.partition = partition
        self._perms: dict[tuple[str, int], _IndexPerm] = {}

    def index(self, space: int, stream: str, pos: int) -> int:
        count = self.partition.slice_count(space)
        if count == 0:
            raise NoEligibleProduct(
                f"value space of {space} too small for partition slot "
                f"{self.partition.slot}/{self.partition.total} ({stream})")
        perm = self._perms.get((stream, count))
        if perm is None:
            perm = _IndexPerm(count, _stream(self.layout_seed, "perm:" + stream))
            self._perms[(stream, count)] = perm
        return self.partition.to_global(perm(pos))


def luhn_check_digit(digits: str) -> int:
    total = 0
    for i, ch in enumerate(reversed(digits)):
        d = int(ch)
        if i % 2 == 0:
            d *= 2
            if d > 9:
                d -= 9
        total += d
    return (10 - total % 10) % 10


def _card_from_index(idx: int) -> str:
    body = "4" + str(idx).zfill(14)  # visa-style 16-digit pan
    pan = body + str(luhn_check_digit(body))
    return " ".join(pan[i:i + 4] for i in range(0, 16, 4))


def _street_from_index(idx: int) -> str:
    names, types = _pool("street_names.txt"), _pool("street_types.txt")
    idx, number = divmod(idx, 9900)
    idx, name_i = divmod(idx, len(names))
    idx, type_i = divmod(idx, len(types))
    suite = idx  # 0 = none, 1..900 -> Suite 100..999, 901..999 -> Apt 1..99
    line = f"{100 + number} {names[name_i]} {types[type_i]}"
    if 1 <= suite <= 900:
        line += f" Suite {99 + suite}"
    elif suite > 900:
        line += f" Apt {suite - 900}"
    return line


_STREET_SPACE = 9900 * 114 * 12 * 1000  # number x name x type x suite


def _phone_from_index(idx: int) -> str:
    idx, line = divmod(idx, 10000)
    idx, exchange = divmod(idx, 800)
    area = idx
    return f"({200 + area}) {200 + exchange}-{line:04d}"


_PHONE_SPACE = 800 * 800 * 10000


def generate_config(
    spec: LayoutDataSpec,
    catalog: Catalog | None,
    master_seed: int,
    layout_id: str,
    variant_index: int,
    partition: PoolPartition = WHOLE,
) -> DataConfig:
    """Produce one deterministic injection config for a layout variant."""
    seed = config_seed(master_seed, layout_id, variant_index)
    draws = _LayoutDraws(master_seed, layout_id, partition)
    firsts, lasts = _first_names(), _last_names()
    name_space = len(firsts) * len(lasts)

    required = sorted(spec.required_keys)
    values: dict = {}
    provenance: dict[str, str] = {}

    def put(key, value, origin):
        values[key] = value
        provenance[key] = origin

    # one person identity per config; related keys stay coherent
    person_idx = draws.index(name_space, "person", variant_index)
    first, last = firsts[person_idx // len(lasts)], lasts[person_idx % len(lasts)]

    recipient_idx = draws.index(name_space, "recipient", variant_index)
    recipient_first = firsts[recipient_idx // len(lasts)]
    recipient_last = lasts[recipient_idx % len(lasts)]

    product_keys = sorted(
        {int(m.group(1)) for k in required if (m := _PRODUCT_KEY_RE.match(k))})
    products = {}
    if product_keys:
        if catalog is None or len(catalog) == 0:
            raise NoEligibleProduct("layout requires product keys but catalog is empty")
        recs = eligible_records(catalog)
        for j, pnum in enumerate(product_keys):
            ridx = draws.index(len(recs), "product",
                               variant_index * len(product_keys) + j)
            products[pnum] = recs[ridx]

    card_idx = None

    for key in required:
        if key in values:
            continue
        if key in spec.extracted_constants:
            put(key, spec.extracted_constants[key], "extracted")
            continue
        if key in DERIVED_KEYS:
            continue  # filled by derive_values below
        rng = _stream(seed, "key:" + key)
        m = _PRODUCT_KEY_RE.match(key)
        if m:
            pnum, attr = int(m.group(1)), m.group(2)
            rec = products[pnum]
            if attr == "NAME":
                put(key, rec.title, "catalog")
            elif attr == "BRAND":
                put(key, rec.brand or rec.title.split()[0], "catalog")
            elif attr == "DESCRIPTION":
                put(key, rec.description or rec.title, "catalog")
            elif attr == "IMAGE":
                put(key, ImageRef(rec.image_ref), "catalog")
            elif attr == "PRICE":
                put(key, Money(rng.randrange(199, 20000)), "randomized")
            elif attr == "QTY":
                put(key, rng.randint(1, 3), "randomized")
            elif attr == "RATING":
                put(key, f"{rng.randrange(30, 51) / 10:.1f}", "randomized")
            elif attr == "REVIEWS":
                put(key, rng.randint(1, 50000), "randomized")
            else:
                raise MissingGenerator(f"no generation rule for key {key}")
            continue
        template = spec.id_template(key)
        if template is not None:
            id_keys = sorted(k for k in required
                             if spec.id_template(k) is not None)
            j = id_keys.index(key)
            idx = draws.index(template.space(), "idfmt",
                              variant_index * len(id_keys) + j)
            put(key, template.expand(idx), "randomized")
            continue
        if key == "PII_FULLNAME":
            put(key, f"{first} {last}", "synthetic_pii")
        elif key == "PII_FIRSTNAME":
            put(key, first, "synthetic_pii")
        elif key == "PII_LASTNAME":
            put(key, last, "synthetic_pii")
        elif key == "PII_EMAIL":
            domains = _pool("email_domains.txt")
            num = rng.randrange(1, 1000)
            put(key, f"{first.lower()}.{last.lower()}{num}@{rng.choice(domains)}",
                "synthetic_pii")
        elif key == "PII_PHONE":
            put(key, _phone_from_index(
                draws.index(_PHONE_SPACE, "phone", variant_index)), "synthetic_pii")
        elif key == "PII_STREET":
            put(key, _street_from_index(
                draws.index(_STREET_SPACE, "street", variant_index)), "synthetic_pii")
        elif key == "PII_CITY":
            put(key, rng.choice(_pool("cities.txt")), "synthetic_pii")
        elif key == "PII_STATE":
            put(key, rng.choice(_pool("states.txt")).split(",")[0], "synthetic_pii")
        elif key == "PII_ZIP":
            put(key, f"{rng.randrange(10000, 100000)}", "synthetic_pii")
        elif key == "PII_CARD":
            card_idx = draws.index(10 ** 14, "card", variant_index)
            put(key, _card_from_index(card_idx), "synthetic_pii")
        elif key == "PII_CARD_LAST4":
            if card_idx is None:
                card_idx = draws.index(10 ** 14, "card", variant_index)
            put(key, _card_from_index(card_idx).split()[-1], "synthetic_pii")
        elif key == "PII_CVV":
            put(key, f"{rng.randrange(100, 1000)}", "synthetic_pii")
        elif key == "PII_CARD_EXPIRY":
            put(key, f"{rng.randint(1, 12):02d}/{rng.randint(26, 31)}", "synthetic_pii")
        elif key == "PII_GIFT_RECIPIENT":
            put(key, f"{recipient_first} {recipient_last}", "synthetic_pii")
        elif key == "ORDER_DATE" or key == "ORDER_DELIVERY_DATE":
            date_rng = _stream(seed, "key:ORDER_DATE")
            base = dt.date(2020, 1, 1) + dt.timedelta(days=date_rng.randrange(0, 1642))
            if key == "ORDER_DATE":
                put(key, base, "synthetic_pii")
            else:
                put(key, base + dt.timedelta(days=date_rng.randint(2, 14)),
                    "synthetic_pii")
        elif key == "GIFT_MESSAGE":
            templates = _pool("gift_templates.txt")
            if products:
                tpl = rng.choice(templates)
                product_name = " ".join(
                    products[product_keys[0]].title.split()[:4])
            else:
                tpl = rng.choice([t for t in templates if "{product}" not in t])
                product_name = ""
            put(key, tpl.format(recipient=recipient_first, product=product_name),
                "synthetic_pii")
        else:
            raise MissingGenerator(f"no generation rule for key {key}")

    # delivery strictly after order date whenever both exist
    if "ORDER_DATE" in values and "ORDER_DELIVERY_DATE" in values:
        assert values["ORDER_DELIVERY_DATE"] > values["ORDER_DATE"]

    needs_derive = bool(DERIVED_KEYS & spec.required_keys) or any(
        _PRICE_RE.match(k) for k in values)
    if needs_derive:
        derived = derive_values(values, spec)
        for key in DERIVED_KEYS:
            if key in spec.required_keys or key in values:
                values[key] = derived[key]
                provenance[key] = "derived"

    missing = spec.required_keys - values.keys()
    if missing:
        raise MissingGenerator(f"no generation rule for keys {sorted(missing)}")

    inc_rng = _stream(seed, "optional")
    included = frozenset(
        fid for fid in sorted(spec.optional_field_ids)
        if inc_rng.random() < spec.optional_p)

    return DataConfig(seed=seed, values=values,
                      included_optional_fields=included, provenance=provenance)
