"""Text-extraction baseline: rule patterns over external OCR word boxes.

Consumes word-level OCR output (sample_id, text, box, confidence per
line), flags sensitive spans with seven rules (email, phone, Luhn-valid
card numbers, zip, date, money, name gazetteer over sliding windows up to
six words), merges flagged words into per-line field boxes, and emits
detections in the evaluation kit's input format. An external classifier
command can replace the rules: it receives the word list as JSON on stdin
and answers {"pii_items": [{"text": "exact text"}]}.
"""

from __future__ import annotations

import json
import re
import subprocess
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path

from .evalkit import Detection, write_detections
from .model import BBox
from .render.extract import group_rects_into_lines

MAX_WINDOW = 6


class ParseError(Exception):
    pass


class ClassifierFailed(Exception):
    pass


@dataclass(frozen=True)
class OcrWord:
    text: str
    box: BBox
    confidence: float

    def __post_init__(self):
        if not self.text:
            raise ValueError("empty OCR word")


@dataclass(frozen=True)
class Span:
    rule: str
    start: int  # word index, inclusive
    end: int  # word index, exclusive


# --- rules ---

_EMAIL_RE = re.compile(r"^[\w.+-]+@[\w-]+\.[\w.]+$")
_PHONE_RE = re.compile(r"^\(?\d{3}\)?[ .-]?\d{3}[ .-]?\d{4}$")
_ZIP_RE = re.compile(r"^\d{5}(-\d{4})?$")
_MONEY_RE = re.compile(r"^\$\d{1,3}(,\d{3})*(\.\d{2})?$|^\$?\d+\.\d{2}$")
_DATE_WORD_RE = re.compile(
    r"^(January|February|March|April|May|June|July|August|September|October|"
    r"November|December)$", re.I)
_DATE_NUM_RE = re.compile(r"^\d{1,2},?$")
_YEAR_RE = re.compile(r"^\d{4},?$")
_DIGITS_SEP_RE = re.compile(r"^[\d -]+$")


def luhn_valid(digits: str) -> bool:
    if not digits.isdigit() or not 13 <= len(digits) <= 19:
        return False
    total = 0
    for i, ch in enumerate(reversed(digits)):
        d = int(ch)
        if i % 2 == 1:
            d *= 2
            if d > 9:
                d -= 9
        total += d
    return total % 10 == 0


@lru_cache(maxsize=None)
def _gazetteer() -> frozenset[str]:
    names = set()
    for fname in ("first_names.txt", "last_names.txt"):
        text = resources.files("screenforge.data").joinpath(fname).read_text("utf-8")
        names.update(line.strip().lower() for line in text.splitlines() if line.strip())
    return frozenset(names)


def _window_rule(rule: str, words: list[str]) -> bool:
    joined = " ".join(words)
    if rule == "email":
        return len(words) == 1 and bool(_EMAIL_RE.match(words[0]))
    if rule == "phone":
        squeezed = joined.replace(" ", "")
        return bool(_PHONE_RE.match(joined)) or bool(_PHONE_RE.match(squeezed))
    if rule == "card_luhn":
        if not all(_DIGITS_SEP_RE.match(w) for w in words):
            return False
        return luhn_valid(re.sub(r"[ -]", "", joined))
    if rule == "zip":
        return len(words) == 1 and bool(_ZIP_RE.match(words[0]))
    if rule == "date":
        if len(words) == 2 and _DATE_WORD_RE.match(words[0]) \
                and _DATE_NUM_RE.match(words[1]):
            return True
        return (len(words) == 3 and bool(_DATE_WORD_RE.match(words[0]))
                and bool(_DATE_NUM_RE.match(words[1]))
                and bool(_YEAR_RE.match(words[2])))
    if rule == "money":
        return len(words) == 1 and bool(_MONEY_RE.match(words[0]))
    if rule == "name_gazetteer":
        gaz = _gazetteer()
        return (len(words) == 2
                and all(w.strip(".,").lower() in gaz for w in words))
    raise ValueError(f"unknown rule {rule!r}")


RULE_NAMES = ("email", "phone", "card_luhn", "zip", "date", "money",
              "name_gazetteer")

_RULE_WINDOWS = {
    "email": (1,), "zip": (1,), "money": (1,),
    "phone": (1, 2, 3), "date": (2, 3), "name_gazetteer": (2,),
    "card_luhn": (1, 2, 3, 4, 5, 6),
}


def classify_spans(words: list[OcrWord],
                   rules=RULE_NAMES) -> list[Span]:
    """Flag word-index spans; overlapping flags are merged per rule.

    Words must be in reading order (line-major, then x).
    """
    texts = [w.text for w in words]
    flagged: dict[str, list[tuple[int, int]]] = {rule: [] for rule in rules}
    for rule in rules:
        for size in _RULE_WINDOWS.get(rule, range(1, MAX_WINDOW + 1)):
            for start in range(0, len(texts) - size + 1):
                if _window_rule(rule, texts[start:start + size]):
                    flagged[rule].append((start, start + size))
    spans = []
    for rule in rules:
        for start, end in _merge_ranges(flagged[rule]):
            spans.append(Span(rule=rule, start=start, end=end))
    spans.sort(key=lambda s: (s.start, s.end, s.rule))
    return spans


def _merge_ranges(ranges: list[tuple[int, int]]) -> list[tuple[int, int]]:
    merged: list[list[int]] = []
    for start, end in sorted(ranges):
        if merged and start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], end)
        else:
            merged.append([start, end])
    return [(a, b) for a, b in merged]


def merge_span_to_boxes(span: Span, words: list[OcrWord],
                        sample_id: str) -> list[Detection]:
    """One detection per rendered line the span covers.

    Box = union of member word boxes on the line; confidence = the
    weakest member word; class is the coarse text group.
    """
    members = words[span.start:span.end]
    rects = [[float(w.box.x), float(w.box.y), float(w.box.w), float(w.box.h)]
             for w in members]
    confidence = min(w.confidence for w in members)
    out = []
    for line in group_rects_into_lines(rects):
        out.append(Detection(
            sample_id=sample_id,
            box=BBox(int(round(line[0])), int(round(line[1])),
                     int(round(line[2])), int(round(line[3]))),
            cls="text", confidence=confidence))
    return out


# --- OCR file format: sample_id text x y w h confidence ---

def read_ocr_words(path: str | Path) -> dict[str, list[OcrWord]]:
    by_sample: dict[str, list[OcrWord]] = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 7:
            raise ParseError(f"{path}:{n}: expected 7 fields, got {len(parts)}")
        sample_id, text, x, y, w, h, conf = parts
        try:
            word = OcrWord(text, BBox(int(x), int(y), int(w), int(h)), float(conf))
        except ValueError as exc:
            raise ParseError(f"{path}:{n}: {exc}") from exc
        by_sample.setdefault(sample_id, []).append(word)
    for words in by_sample.values():
        words.sort(key=lambda w: (w.box.y // 8, w.box.x, w.box.y))
    return by_sample


class ExternalClassifier:
    """Adapter for a user-supplied classifier command.

    The command gets {"words": [...texts...]} on stdin and must print
    {"pii_items": [{"text": "exact text"}]}; flagged exact texts are
    mapped back onto every matching word.
    """

    def __init__(self, command: list[str]):
        self.command = command

    def __call__(self, words: list[OcrWord]) -> list[Span]:
        payload = json.dumps({"words": [w.text for w in words]})
        proc = subprocess.run(
            self.command, input=payload, capture_output=True, text=True)
        if proc.returncode != 0:
            raise ClassifierFailed(
                f"{self.command} exited {proc.returncode}: {proc.stderr[:200]}")
        try:
            flagged = {item["text"] for item in
                       json.loads(proc.stdout)["pii_items"]}
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ClassifierFailed(f"bad classifier output: {exc}") from exc
        ranges = [(i, i + 1) for i, w in enumerate(words) if w.text in flagged]
        return [Span("external", a, b) for a, b in _merge_ranges(ranges)]


def run_baseline(ocr_path: str | Path, out_path: str | Path,
                 rules=RULE_NAMES, classifier=None) -> list[Detection]:
    """End-to-end classify + merge over an OCR dump; deterministic."""
    by_sample = read_ocr_words(ocr_path)
    detections: list[Detection] = []
    for sample_id in sorted(by_sample):
        words = by_sample[sample_id]
        spans = classifier(words) if classifier else classify_spans(words, rules)
        for span in spans:
            detections.extend(merge_span_to_boxes(span, words, sample_id))
    write_detections(detections, out_path)
    return detections
