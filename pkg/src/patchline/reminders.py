"""Medication dosage reminder engine: a dosing-rule table drives timed
next-dose reminders and right-drug/dose/route validation.

All times are injected seconds since incident start; the engine never
reads wall-clock time, so replaying an event log reproduces the exact
reminder sequence.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

WRONG_DRUG = "WrongDrug"
WRONG_DOSE = "WrongDose"
WRONG_ROUTE = "WrongRoute"


class UnknownDrug(Exception):
    pass


@dataclass(frozen=True)
class DosingRule:
    drug: str
    dose_amount: float
    dose_unit: str
    route: str
    interval_seconds: float
    max_doses: int

    def __post_init__(self):
        if self.dose_amount <= 0 or self.interval_seconds <= 0:
            raise ValueError("dose amount and interval must be positive")
        if self.max_doses < 1:
            raise ValueError("max_doses must be >= 1")


@dataclass
class AdministrationEvent:
    drug: str
    dose_amount: float
    dose_unit: str
    route: str
    time: float

    def __post_init__(self):
        if self.time < 0:
            raise ValueError("time must be >= 0")


@dataclass
class Reminder:
    id: str
    drug: str
    dose_amount: float
    dose_unit: str
    route: str
    due_time: float
    status: str = "pending"   # pending -> fired -> acknowledged

    def to_dict(self) -> dict:
        return {
            "id": self.id, "drug": self.drug, "dose_amount": self.dose_amount,
            "dose_unit": self.dose_unit, "route": self.route,
            "due_time": self.due_time, "status": self.status,
        }


class MedicationSchedule:
    """Single-writer reminder state machine for one incident session."""

    def __init__(self, rules):
        self.rules = {r.drug: r for r in rules}
        self.dose_counts: dict = {}
        self.reminders: list = []
        self._next_id = 1

    def record_administration(self, event: AdministrationEvent):
        """Count the dose; schedule the next-dose reminder at
        event.time + interval unless the max dose count is reached.
        Returns the new Reminder or None."""
        rule = self.rules.get(event.drug)
        if rule is None:
            raise UnknownDrug(event.drug)
        count = self.dose_counts.get(event.drug, 0) + 1
        self.dose_counts[event.drug] = count
        if count >= rule.max_doses:
            return None
        reminder = Reminder(
            id=f"r{self._next_id}",
            drug=rule.drug,
            dose_amount=rule.dose_amount,
            dose_unit=rule.dose_unit,
            route=rule.route,
            due_time=event.time + rule.interval_seconds,
        )
        self._next_id += 1
        self.reminders.append(reminder)
        return reminder

    def due_reminders(self, now: float):
        """Fire every pending reminder whose due time has arrived
        (inclusive boundary); returns them ordered by (due_time, drug)."""
        due = [r for r in self.reminders if r.status == "pending" and r.due_time <= now]
        due.sort(key=lambda r: (r.due_time, r.drug))
        for r in due:
            r.status = "fired"
        return due

    def acknowledge(self, reminder_id: str) -> "Reminder":
        for r in self.reminders:
            if r.id == reminder_id:
                if r.status == "fired":
                    r.status = "acknowledged"
                return r
        raise KeyError(reminder_id)


def validate_order(rules, drug: str, dose_amount: float, dose_unit: str, route: str):
    """Check an order against the rule table; [] means ok, otherwise one
    violation per mismatched dimension."""
    table = {r.drug: r for r in rules} if not isinstance(rules, dict) else rules
    rule = table.get(drug)
    if rule is None:
        return [WRONG_DRUG]
    violations = []
    if dose_amount != rule.dose_amount or dose_unit != rule.dose_unit:
        violations.append(WRONG_DOSE)
    if route != rule.route:
        violations.append(WRONG_ROUTE)
    return violations


def load_dosing_rules(path):
    rules = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            rules.append(DosingRule(
                drug=row["drug"].strip(),
                dose_amount=float(row["dose_amount"]),
                dose_unit=row["dose_unit"].strip(),
                route=row["route"].strip(),
                interval_seconds=float(row["interval_seconds"]),
                max_doses=int(row["max_doses"]),
            ))
    return rules
