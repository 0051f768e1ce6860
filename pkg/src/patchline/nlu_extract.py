"""Sentence splitting, rule-based lemmatization and patch-form field
extraction from paramedic speech transcripts.

The patterns work on lemmatized tokens but field values are cut from the
original tokens, so verbatim fields (history, physical_exam, comments)
keep the speaker's wording. Merge policy is first-wins: later sentences
never erase a value, only fill gaps.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, fields as dc_fields
from importlib import resources

from .decode_lm import edit_distance

_NUM = re.compile(r"^\d+$")
_DECIMAL = re.compile(r"^\d+(\.\d+)?$")
_TOKEN_TRIM = ",;:\"'()[]"


# ---------------------------------------------------------------- patch form

PATCH_FORM_FIELDS = (
    "transcript", "age", "gender", "CTAS", "BP", "systolic", "diastolic",
    "pain", "medications", "medications_comment", "pupil_left", "pupil_right",
    "pupil_reactive_left", "pupil_reactive_right", "temperature", "pulse",
    "physical_exam", "allergies", "physical_findings_abdomen",
    "physical_findings_skin_condition", "physical_findings_skin_color",
    "history", "past_medical_history", "NTG_prior", "treatment",
    "pale", "sweaty",
)

_FLAG_FIELDS = ("NTG_prior", "pale", "sweaty", "pupil_reactive_left", "pupil_reactive_right")


@dataclass
class PatchForm:
    transcript: str | None = None
    age: str | None = None
    gender: str | None = None
    CTAS: str | None = None
    BP: str | None = None
    systolic: str | None = None
    diastolic: str | None = None
    pain: str | None = None
    medications: str | None = None
    medications_comment: str | None = None
    pupil_left: str | None = None
    pupil_right: str | None = None
    pupil_reactive_left: str | None = None
    pupil_reactive_right: str | None = None
    temperature: str | None = None
    pulse: str | None = None
    physical_exam: str | None = None
    allergies: str | None = None
    physical_findings_abdomen: str | None = None
    physical_findings_skin_condition: str | None = None
    physical_findings_skin_color: str | None = None
    history: str | None = None
    past_medical_history: str | None = None
    NTG_prior: str | None = None
    treatment: str | None = None
    pale: str | None = None
    sweaty: str | None = None

    def to_dict(self) -> dict:
        """Field order follows the canonical vocabulary; empty fields omitted."""
        return {name: getattr(self, name) for name in PATCH_FORM_FIELDS
                if getattr(self, name) is not None}

    @classmethod
    def from_dict(cls, data: dict) -> "PatchForm":
        unknown = set(data) - set(PATCH_FORM_FIELDS)
        if unknown:
            raise ValueError(f"unknown patch form fields: {sorted(unknown)}")
        return cls(**{k: (str(v) if v is not None else None) for k, v in data.items()})

    def merge_first_wins(self, other: "PatchForm") -> dict:
        """Fill this form's gaps from other; returns the delta applied."""
        delta = {}
        for f in dc_fields(self):
            if getattr(self, f.name) is None and getattr(other, f.name) is not None:
                value = getattr(other, f.name)
                setattr(self, f.name, value)
                delta[f.name] = value
        return delta

    def validate(self) -> dict:
        """Invariant check; returns {field: message} for violations."""
        errors = {}
        if self.BP is not None:
            if self.systolic is None or self.diastolic is None:
                errors["BP"] = "BP requires systolic and diastolic"
            elif self.BP != f"{self.systolic} / {self.diastolic}":
                errors["BP"] = "BP must equal '{systolic} / {diastolic}'"
        if self.gender is not None and self.gender not in ("M", "F"):
            errors["gender"] = "gender must be M or F"
        if self.CTAS is not None and self.CTAS not in ("1", "2", "3", "4", "5"):
            errors["CTAS"] = "CTAS must be 1-5"
        for name in _FLAG_FIELDS:
            value = getattr(self, name)
            if value is not None and value != "1":
                errors[name] = "flag fields may only hold '1'"
        return errors


# ----------------------------------------------------------------- lexicons

@dataclass
class MedLexicon:
    surfaces: dict  # lowercase surface -> canonical name

    def canonical(self, token: str):
        return self.surfaces.get(token.lower())


@dataclass
class LemmaRules:
    exceptions: dict
    rules: list  # (suffix, replacement), tried longest suffix first


@dataclass
class ExtractionLexicons:
    med: MedLexicon
    conditions: dict            # lowercase surface -> canonical condition
    lemma: LemmaRules
    comment_stopwords: set


def _load_tsv(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line.strip():
                continue
            surface, canonical = line.split("\t")
            out[surface.strip().lower()] = canonical.strip()
    return out


def load_lexicons(directory) -> ExtractionLexicons:
    directory = str(directory)
    med = MedLexicon(_load_tsv(f"{directory}/med_lexicon.tsv"))
    conditions = _load_tsv(f"{directory}/condition_lexicon.tsv")
    with open(f"{directory}/lemma_rules.json", encoding="utf-8") as fh:
        doc = json.load(fh)
    lemma = LemmaRules(doc["exceptions"], [tuple(r) for r in doc["rules"]])
    with open(f"{directory}/comment_stopwords.txt", encoding="utf-8") as fh:
        stopwords = {line.strip() for line in fh if line.strip()}
    return ExtractionLexicons(med, conditions, lemma, stopwords)


_default_lexicons = None


def default_lexicons() -> ExtractionLexicons:
    global _default_lexicons
    if _default_lexicons is None:
        root = resources.files("patchline") / "fixtures"
        _default_lexicons = load_lexicons(root)
    return _default_lexicons


# ------------------------------------------------------------ text plumbing

def split_sentences(transcript: str) -> list:
    """Split on ./!/? boundaries, trim whitespace, drop empty fragments."""
    parts = re.split(r"[.!?]", transcript)
    return [p.strip() for p in parts if p.strip()]


def tokenize(sentence: str) -> list:
    tokens = []
    for raw in sentence.split():
        token = raw.strip(_TOKEN_TRIM)
        if token:
            tokens.append(token)
    return tokens


_DOUBLE_OK = ("ll", "ss", "zz")


def lemmatize(token: str, rules: LemmaRules) -> str:
    """Exception table first, then the longest matching suffix rule."""
    if token in rules.exceptions:
        return rules.exceptions[token]
    if not any(c.isalpha() for c in token):
        return token
    for suffix, repl in sorted(rules.rules, key=lambda r: -len(r[0])):
        if not token.endswith(suffix) or len(token) - len(suffix) < 2:
            continue
        if suffix == "s" and token.endswith(("ss", "us", "is")):
            continue
        stem = token[: len(token) - len(suffix)]
        if suffix == "ing" and len(stem) >= 3 and stem[-1] == stem[-2] \
                and stem[-2:] not in _DOUBLE_OK:
            stem = stem[:-1]
        return stem + repl
    return token


def canonicalize_medication(token: str, lex: MedLexicon):
    """Exact surface hit, else a unique edit-distance-1 hit, else None."""
    token = token.lower()
    hit = lex.canonical(token)
    if hit is not None:
        return hit
    near = {c for s, c in lex.surfaces.items() if edit_distance(token, s) <= 1}
    if len(near) == 1:
        return near.pop()
    return None


def parse_blood_pressure(text: str, lexicons: ExtractionLexicons | None = None):
    """Match '(bp|blood pressure) is N over M'; returns (N, M) ints or None."""
    lex = lexicons or default_lexicons()
    for sentence in split_sentences(text) or [text]:
        originals = tokenize(sentence)
        lemmas = [lemmatize(t.lower(), lex.lemma) for t in originals]
        hit = _find_bp(lemmas)
        if hit:
            return hit
    return None


def _find_bp(lemmas):
    for i, lemma in enumerate(lemmas):
        start = None
        if lemma == "bp":
            start = i + 1
        elif lemma == "blood" and i + 1 < len(lemmas) and lemmas[i + 1] == "pressure":
            start = i + 2
        if start is None:
            continue
        window = lemmas[start:start + 4]
        if len(window) == 4 and window[0] == "is" and _NUM.match(window[1]) \
                and window[2] == "over" and _NUM.match(window[3]):
            return int(window[1]), int(window[3])
    return None


# ------------------------------------------------------- field extraction

_ABDOMEN_FINDINGS = ("rigid", "distended")
_MED_FIELD_EXCLUDES = {"nitroglycerin"}  # administered drug, not a home med


def _match_medication_window(window: str, med: MedLexicon):
    """Find medication surfaces in the window as substrings, tolerating a
    single space inside a surface (OCR/ASR run-ons like 'has a' ~ 'asa').
    Returns (hits ordered by position, leftover text with matches cut out).
    """
    low = window.lower()
    consumed = [False] * len(low)
    hits = []
    for surface in sorted(med.surfaces, key=len, reverse=True):
        if len(surface) < 3:
            continue
        pattern = re.compile(r"\s?".join(re.escape(ch) for ch in surface))
        for m in pattern.finditer(low):
            if any(consumed[m.start():m.end()]):
                continue
            for k in range(m.start(), m.end()):
                consumed[k] = True
            hits.append((m.start(), med.surfaces[surface]))
    hits.sort()
    leftover = "".join(ch for k, ch in enumerate(window) if not consumed[k])
    return [canonical for _, canonical in hits], leftover


class _FormBuilder:
    def __init__(self):
        self.values = {}

    def set_first(self, name: str, value: str) -> None:
        if name not in self.values:
            self.values[name] = value

    def form(self) -> PatchForm:
        return PatchForm(**self.values)


def extract_fields(transcript: str, lexicons: ExtractionLexicons | None = None) -> PatchForm:
    """Apply the pattern-rule set over lemmatized sentences and merge the
    results into one patch form (first value wins per field)."""
    lex = lexicons or default_lexicons()
    sentences = split_sentences(transcript)
    parsed = []
    for sentence in sentences:
        originals = tokenize(sentence)
        lemmas = [lemmatize(t.lower(), lex.lemma) for t in originals]
        parsed.append((originals, lemmas))

    fb = _FormBuilder()
    chest_pain_context = any(
        "chest" in lemmas and "pain" in lemmas for _, lemmas in parsed)
    abdomen_findings = []
    conditions = []
    ntg_in_history = False

    for originals, lemmas in parsed:
        n = len(lemmas)

        for i, lemma in enumerate(lemmas):
            # age / gender: "N year old (male|female)"
            if _NUM.match(lemma) and lemmas[i + 1:i + 3] == ["year", "old"]:
                fb.set_first("age", originals[i])
            if lemma == "male":
                fb.set_first("gender", "M")
            elif lemma == "female":
                fb.set_first("gender", "F")

            # pain score: "pain N"
            if lemma == "pain" and i + 1 < n and _NUM.match(lemmas[i + 1]):
                fb.set_first("pain", originals[i + 1])

            # chest-pain complaint with no score reading becomes history
            if lemma == "substernal" and lemmas[i + 1:i + 3] == ["chest", "pain"] \
                    and not (i + 3 < n and _NUM.match(lemmas[i + 3])):
                fb.set_first("history", "substernal_chest_pain")

            # CTAS: "ctas (assessment)? N"
            if lemma == "ctas":
                j = i + 1
                if j < n and lemmas[j] == "assessment":
                    j += 1
                if j < n and lemmas[j] in ("1", "2", "3", "4", "5"):
                    fb.set_first("CTAS", originals[j])

            # vitals: "pulse is N", "temperature is N"
            if lemma == "pulse" and lemmas[i + 1:i + 2] == ["is"] \
                    and i + 2 < n and _NUM.match(lemmas[i + 2]):
                fb.set_first("pulse", originals[i + 2])
            if lemma == "temperature" and lemmas[i + 1:i + 2] == ["is"] \
                    and i + 2 < n and _DECIMAL.match(lemmas[i + 2]):
                fb.set_first("temperature", originals[i + 2])

            # pupils: "pupil is N (+ reactive)" fills both sides
            if lemma == "pupil" and lemmas[i + 1:i + 2] == ["is"] \
                    and i + 2 < n and _NUM.match(lemmas[i + 2]):
                fb.set_first("pupil_left", originals[i + 2])
                fb.set_first("pupil_right", originals[i + 2])
                if "reactive" in lemmas[i + 3:i + 5]:
                    fb.set_first("pupil_reactive_left", "1")
                    fb.set_first("pupil_reactive_right", "1")

            # allergies: "no allergies" -> NKA, else the named allergen
            if lemma == "allergy":
                if i > 0 and lemmas[i - 1] == "no":
                    fb.set_first("allergies", "NKA")
                elif i + 1 < n:
                    canonical = lex.med.canonical(lemmas[i + 1])
                    fb.set_first("allergies", canonical or originals[i + 1])

            # skin descriptors and status flags
            if lemma == "clammy":
                fb.set_first("physical_findings_skin_condition", "clammy")
            if lemma == "pale":
                fb.set_first("physical_findings_skin_color", "pale")
                fb.set_first("pale", "1")
            if lemma == "sweaty":
                fb.set_first("sweaty", "1")

            # history: "history of <rest of sentence>" (verbatim)
            if lemma == "history" and lemmas[i + 1:i + 2] == ["of"] and i + 2 < n:
                tail = " ".join(originals[i + 2:])
                fb.set_first("history", tail)
                for t in lemmas[i + 2:]:
                    if lex.conditions.get(t) == "nitroglycerin":
                        ntg_in_history = True

            # treatment request: "request treatment of additional X"
            if lemmas[i:i + 4] == ["request", "treatment", "of", "additional"] \
                    and i + 4 < n:
                canonical = lex.med.canonical(lemmas[i + 4]) or originals[i + 4]
                fb.set_first("treatment", f"additional, {canonical}")

            # conditions anywhere feed past medical history, except
            # nitroglycerin which only counts inside a history-of clause
            canonical = lex.conditions.get(lemma)
            if canonical and canonical != "nitroglycerin" and canonical not in conditions:
                conditions.append(canonical)

        # abdomen findings accumulate within abdomen sentences
        if "abdomen" in lemmas:
            for lemma in lemmas:
                if lemma in _ABDOMEN_FINDINGS and lemma not in abdomen_findings:
                    abdomen_findings.append(lemma)

        # physical exam narrative: verbatim after "physical exam finds"
        for i in range(n - 2):
            if lemmas[i:i + 3] == ["physical", "exam", "find"] and i + 3 < n:
                fb.set_first("physical_exam", " ".join(originals[i + 3:]))

        # blood pressure
        bp = _find_bp(lemmas)
        if bp:
            systolic, diastolic = bp
            fb.set_first("BP", f"{systolic} / {diastolic}")
            fb.set_first("systolic", str(systolic))
            fb.set_first("diastolic", str(diastolic))

        # medications list: window after the "medication(s)" keyword
        if "medication" in lemmas and "medications" not in fb.values:
            idx = lemmas.index("medication")
            window = " ".join(originals[idx + 1:])
            if window:
                meds, leftover = _match_medication_window(window, lex.med)
                meds = [m for m in meds if m not in _MED_FIELD_EXCLUDES]
                deduped = list(dict.fromkeys(meds))
                if chest_pain_context and deduped and "A_S_A" not in deduped:
                    deduped.insert(0, "A_S_A")
                if deduped:
                    fb.set_first("medications", ", ".join(deduped))
                comment = [t for t in leftover.split()
                           if not _NUM.match(t) and t.lower() not in lex.comment_stopwords]
                if comment:
                    fb.set_first("medications_comment", " ".join(comment))

    if abdomen_findings:
        fb.set_first("physical_findings_abdomen", ", ".join(abdomen_findings))
    if conditions or ntg_in_history:
        ordered = conditions + (["nitroglycerin"] if ntg_in_history else [])
        fb.set_first("past_medical_history", ", ".join(ordered))
    if ntg_in_history:
        fb.set_first("NTG_prior", "1")

    return fb.form()
