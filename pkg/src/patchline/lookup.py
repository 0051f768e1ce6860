"""Registries behind the recognition flows: hazard-placard lookup in the
response guidebook table and medicine lookup by drug identification
number, with keyword rescoring of noisy OCR text.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass

from .decode_lm import KeywordMetrics, Lexicon, keyword_score, rescore_tokens

_PLACARD = re.compile(r"^\d{4}$")
_DIN = re.compile(r"^\d{8}$")
_DIN_TOKEN = re.compile(r"\b\d{8}\b")


class LookupFormatError(Exception):
    """Malformed identifier (distinct from a simple miss)."""


@dataclass(frozen=True)
class ErgEntry:
    placard_number: str
    guide_number: str
    material: str
    guidance: str

    def to_dict(self) -> dict:
        return {
            "placard_number": self.placard_number,
            "guide_number": self.guide_number,
            "material": self.material,
            "guidance": self.guidance,
        }


@dataclass(frozen=True)
class DinEntry:
    din: str
    drug: str
    strength: str
    package: str
    keywords: tuple

    def to_dict(self) -> dict:
        return {
            "din": self.din, "drug": self.drug, "strength": self.strength,
            "package": self.package, "keywords": list(self.keywords),
        }


def load_erg_csv(path) -> dict:
    registry = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            entry = ErgEntry(row["placard"].strip(), row["guide"].strip(),
                             row["material"].strip(), row["guidance"].strip())
            if entry.placard_number in registry:
                raise ValueError(f"duplicate placard {entry.placard_number}")
            registry[entry.placard_number] = entry
    return registry


def load_din_csv(path) -> dict:
    registry = {}
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            keywords = tuple(k.strip() for k in row["keywords"].split("|") if k.strip())
            if not keywords:
                raise ValueError(f"DIN {row['din']} has no keywords")
            entry = DinEntry(row["din"].strip(), row["drug"].strip(),
                             row["strength"].strip(), row["package"].strip(), keywords)
            if entry.din in registry:
                raise ValueError(f"duplicate DIN {entry.din}")
            registry[entry.din] = entry
    return registry


def erg_lookup(registry: dict, placard_number: str):
    """Exact placard match; returns the entry or None. The guidance text
    is what the service pushes as a safety warning."""
    if not _PLACARD.match(placard_number or ""):
        raise LookupFormatError(f"placard numbers are 4 digits, got {placard_number!r}")
    return registry.get(placard_number)


def din_lookup(registry: dict, din: str):
    """Exact 8-digit match after stripping a leading 'DIN ' prefix."""
    cleaned = (din or "").strip()
    if cleaned.upper().startswith("DIN "):
        cleaned = cleaned[4:].strip()
    if not _DIN.match(cleaned):
        raise LookupFormatError(f"DINs are 8 digits, got {din!r}")
    return registry.get(cleaned)


@dataclass
class OcrMatch:
    entry: DinEntry | None
    raw_metrics: KeywordMetrics | None
    rescored_metrics: KeywordMetrics | None
    rescored_text: str


def union_lexicon(registry: dict, max_edit: int = 2) -> Lexicon:
    keywords = []
    for entry in registry.values():
        keywords.extend(entry.keywords)
    return Lexicon(tuple(dict.fromkeys(keywords)), max_edit)


def match_ocr_text(registry: dict, ocr_text: str) -> OcrMatch:
    """Identify the medicine named by noisy OCR text.

    An exact DIN token wins outright; otherwise tokens are rescored
    against the union keyword lexicon and the entry with the most
    keyword hits is chosen. Metrics cover the text both before and
    after rescoring.
    """
    if not ocr_text.strip() or not registry:
        return OcrMatch(None, None, None, "")
    lexicon = union_lexicon(registry)
    rescored_text = " ".join(rescore_tokens(ocr_text.split(), lexicon))

    entry = None
    for token in _DIN_TOKEN.findall(ocr_text):
        if token in registry:
            entry = registry[token]
            break
    if entry is None:
        best_hits = 0
        for candidate in sorted(registry.values(), key=lambda e: e.din):
            hits = len(keyword_score(rescored_text, candidate.keywords).found)
            if hits > best_hits:
                best_hits, entry = hits, candidate
        if entry is None:
            return OcrMatch(None, None, None, rescored_text)

    raw = keyword_score(ocr_text, entry.keywords)
    rescored = keyword_score(rescored_text, entry.keywords)
    return OcrMatch(entry, raw, rescored, rescored_text)
