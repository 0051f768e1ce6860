"""Patch-form scoring against the bundled gold set, workflow timing
totals, and deterministic ePCR report generation from an incident
timeline.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

from .nlu_extract import PATCH_FORM_FIELDS, PatchForm

EVENT_KINDS = (
    "dispatch", "transcript_line", "standing_order", "administration",
    "reminder_fired", "reminder_acknowledged", "patch_sent",
    "physician_order", "epcr_confirmed",
)

TABLE2_STEPS = (
    "Dispatch",
    "Standing orders",
    "Paramedic arrival to incident",
    "Status",
    "History",
    "Treatment",
    "Medication dosage reminder",
    "Paramedic call physician",
    "Patch form",
    "Request to physician",
    "Physician order",
    "ePCR (ACP) data input",
)


@dataclass
class TimelineEvent:
    time: float
    kind: str
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown timeline event kind: {self.kind!r}")

    def to_dict(self) -> dict:
        return {"time": self.time, "kind": self.kind, "payload": self.payload}


class IncidentTimeline:
    """Ordered incident record; event times must be non-decreasing."""

    def __init__(self, events=()):
        self.events: list = []
        for e in events:
            self.append(e)

    def append(self, event: TimelineEvent) -> TimelineEvent:
        if self.events and event.time < self.events[-1].time:
            raise ValueError("timeline times must be non-decreasing")
        self.events.append(event)
        return event

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)


_PUNCT_EDGES = re.compile(r"^[\s\.,;:!?'\"]+|[\s\.,;:!?'\"]+$")


def normalize_value(value: str) -> str:
    """Case, surrounding whitespace and edge punctuation never count as
    a mismatch."""
    collapsed = " ".join(str(value).split())
    return _PUNCT_EDGES.sub("", collapsed).lower()


def score_extraction(predicted: PatchForm, gold: PatchForm):
    """(correct, total) over the gold keys, transcript excluded."""
    gold_items = {k: v for k, v in gold.to_dict().items() if k != "transcript"}
    if not gold_items:
        raise ValueError("gold form has no scored fields")
    predicted_items = predicted.to_dict()
    correct = sum(
        1 for k, v in gold_items.items()
        if k in predicted_items and normalize_value(predicted_items[k]) == normalize_value(v))
    return correct, len(gold_items)


def aggregate_accuracy(results) -> float:
    """100 * sum(correct) / sum(total), one-decimal rounding."""
    results = list(results)
    if not results:
        raise ValueError("no scoring results")
    correct = sum(c for c, _ in results)
    total = sum(t for _, t in results)
    return round(100.0 * correct / total, 1)


def workflow_totals(profile: dict) -> float:
    """Sum of the 12 step durations in minutes; every step must be present."""
    missing = [s for s in TABLE2_STEPS if s not in profile]
    if missing:
        raise ValueError(f"missing workflow steps: {missing}")
    return sum(float(profile[s]) for s in TABLE2_STEPS)


def load_workflow_profile(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _payload_json(payload: dict) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


@dataclass
class EpcrDocument:
    text: str
    sidecar: dict

    def to_bytes(self) -> bytes:
        return self.text.encode("utf-8")


def generate_epcr(timeline: IncidentTimeline, form: PatchForm) -> EpcrDocument:
    """Deterministic post-incident report: header, patch-form fields,
    chronological event log, administered medications and standing
    orders. Byte-stable for identical inputs."""
    lines = ["==== ePCR REPORT ====", ""]
    dispatches = [e for e in timeline if e.kind == "dispatch"]
    lines.append("-- Incident --")
    if dispatches:
        lines.append(f"dispatch: {_payload_json(dispatches[0].payload)}")
    else:
        lines.append("dispatch: none")
    lines.append(f"events: {len(timeline)}")
    lines.append("")

    form_items = {k: v for k, v in form.to_dict().items() if k != "transcript"}
    if form_items:
        lines.append("-- Patch Form --")
        for name in PATCH_FORM_FIELDS:
            if name in form_items:
                lines.append(f"{name}: {form_items[name]}")
        lines.append("")

    if len(timeline):
        lines.append("-- Event Log --")
        for e in timeline:
            lines.append(f"[{e.time:.3f}] {e.kind} {_payload_json(e.payload)}")
        lines.append("")

    administrations = [e for e in timeline if e.kind == "administration"]
    if administrations:
        lines.append("-- Medications Administered --")
        for e in administrations:
            p = e.payload
            lines.append(f"[{e.time:.3f}] {p.get('drug')} {p.get('dose_amount')} "
                         f"{p.get('dose_unit')} {p.get('route')}")
        lines.append("")

    orders = [e for e in timeline if e.kind == "standing_order"]
    if orders:
        lines.append("-- Standing Orders --")
        for e in orders:
            top = (e.payload.get("confidence_levels") or [{}])[-1]
            lines.append(f"[{e.time:.3f}] {top.get('order')} "
                         f"confidence={top.get('confidence')}")
        lines.append("")

    lines.append("==== END ====")
    sidecar = {
        "form": form.to_dict(),
        "events": [e.to_dict() for e in timeline],
    }
    return EpcrDocument("\n".join(lines) + "\n", sidecar)


def parse_epcr_form(text: str) -> PatchForm:
    """Recover the patch-form section of a report; the round-trip equals
    the form the report was generated from."""
    fields = {}
    in_section = False
    for line in text.splitlines():
        if line.strip() == "-- Patch Form --":
            in_section = True
            continue
        if in_section:
            if not line.strip() or line.startswith("--"):
                break
            key, _, value = line.partition(": ")
            fields[key] = value
    return PatchForm.from_dict(fields)
