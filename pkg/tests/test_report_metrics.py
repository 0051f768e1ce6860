import pytest

from patchline.nlu_extract import PatchForm
from patchline.report_metrics import (TABLE2_STEPS, IncidentTimeline,
                                      TimelineEvent, aggregate_accuracy,
                                      generate_epcr, load_workflow_profile,
                                      normalize_value, parse_epcr_form,
                                      score_extraction, workflow_totals)


def test_score_identical_single_field():
    gold = PatchForm(treatment="additional, nitroglycerin")
    assert score_extraction(gold, gold) == (1, 1)


def test_score_one_mismatched_field_counts_partial():
    fields = {f"pupil_{side}": "3" for side in ("left", "right")}
    gold = PatchForm.from_dict({"age": "50", "gender": "M", "pulse": "90", **fields})
    predicted = PatchForm.from_dict({"age": "50", "gender": "F", "pulse": "90", **fields})
    assert score_extraction(predicted, gold) == (4, 5)


def test_score_empty_prediction():
    gold = PatchForm(age="29", gender="M", pulse="88")
    assert score_extraction(PatchForm(), gold) == (0, 3)


def test_score_requires_scored_gold_fields():
    with pytest.raises(ValueError):
        score_extraction(PatchForm(), PatchForm(transcript="only transcript"))


def test_normalization_forgives_case_whitespace_and_edge_punctuation():
    assert normalize_value("  Penicillin. ") == normalize_value("penicillin")
    assert normalize_value(" pale  sweaty") == normalize_value("pale sweaty")
    gold = PatchForm(physical_exam=" pale sweaty shortness of brea tripod position")
    predicted = PatchForm(physical_exam="pale sweaty shortness of brea tripod position")
    assert score_extraction(predicted, gold) == (1, 1)


def test_aggregate_of_printed_rows():
    printed = [(1, 1), (2, 2), (3, 3), (1, 1), (3, 3), (15, 16), (10, 11)]
    assert aggregate_accuracy(printed) == 94.6


def test_aggregate_perfect_and_published_total():
    assert aggregate_accuracy([(5, 5), (7, 7)]) == 100.0
    assert aggregate_accuracy([(28, 30)]) == 93.3


def test_workflow_totals_from_fixtures(fixtures):
    totals = {}
    for column in ("existing", "proposed", "ideal"):
        profile = load_workflow_profile(fixtures / f"table2_{column}.json")
        totals[column] = workflow_totals(profile)
    assert totals == {"existing": 38.75, "proposed": 50.75, "ideal": 16.75}


def test_workflow_missing_step_rejected(fixtures):
    profile = load_workflow_profile(fixtures / "table2_existing.json")
    profile.pop("Dispatch")
    with pytest.raises(ValueError):
        workflow_totals(profile)
    assert len(TABLE2_STEPS) == 12


def make_timeline():
    timeline = IncidentTimeline()
    timeline.append(TimelineEvent(0.0, "dispatch", {"problem_nature_type": "CHEST"}))
    timeline.append(TimelineEvent(5.0, "standing_order", {
        "confidence_levels": [{"order": "B", "confidence": "0.2"},
                              {"order": "A", "confidence": "0.8"}],
        "timestamp": "20190101T010101-000000"}))
    timeline.append(TimelineEvent(9.0, "administration", {
        "drug": "nitroglycerin", "dose_amount": 0.4, "dose_unit": "mg", "route": "SL"}))
    return timeline


def test_empty_inputs_give_header_only_document():
    doc = generate_epcr(IncidentTimeline(), PatchForm())
    assert "-- Incident --" in doc.text
    assert "dispatch: none" in doc.text
    assert "-- Patch Form --" not in doc.text
    assert "-- Event Log --" not in doc.text


def test_identical_inputs_are_byte_identical():
    form = PatchForm(age="50", gender="M")
    a = generate_epcr(make_timeline(), form)
    b = generate_epcr(make_timeline(), form)
    assert a.to_bytes() == b.to_bytes()


def test_administration_section_lists_exactly_the_event():
    doc = generate_epcr(make_timeline(), PatchForm())
    section = doc.text.split("-- Medications Administered --")[1]
    section = section.split("--")[0]
    lines = [l for l in section.strip().splitlines()]
    assert lines == ["[9.000] nitroglycerin 0.4 mg SL"]


def test_standing_order_section_shows_top_confidence():
    doc = generate_epcr(make_timeline(), PatchForm())
    assert "[5.000] A confidence=0.8" in doc.text


def test_patch_form_section_round_trips():
    form = PatchForm(age="50", gender="M", BP="154 / 90", systolic="154",
                     diastolic="90", medications="A_S_A, furosemide",
                     physical_exam="pale sweaty tripod position")
    doc = generate_epcr(make_timeline(), form)
    assert parse_epcr_form(doc.text) == form


def test_sidecar_carries_form_and_events():
    form = PatchForm(age="50")
    timeline = make_timeline()
    doc = generate_epcr(timeline, form)
    assert doc.sidecar["form"] == {"age": "50"}
    assert [e["kind"] for e in doc.sidecar["events"]] == \
        ["dispatch", "standing_order", "administration"]


def test_timeline_rejects_time_travel_and_unknown_kinds():
    timeline = IncidentTimeline()
    timeline.append(TimelineEvent(5.0, "dispatch", {}))
    with pytest.raises(ValueError):
        timeline.append(TimelineEvent(4.0, "transcript_line", {}))
    with pytest.raises(ValueError):
        TimelineEvent(0.0, "rocket_launch", {})
