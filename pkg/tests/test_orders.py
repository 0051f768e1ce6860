import re
from datetime import datetime
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patchline import nn_core, orders
from patchline.orders import (DispatchInfo, HistoricalRecord, InsufficientInformation,
                              OrderModel, feature_names, featurize, load_records_csv,
                              recommend, train_orders, update_recommendation)
from patchline.service import fixtures_dir

from conftest import rel_err

TS_PATTERN = re.compile(r"^\d{8}T\d{6}-\d{6}$")


def fixed_clock(dt=datetime(2019, 1, 1, 1, 1, 1)):
    return lambda: dt


EXAMPLE_DISPATCH = DispatchInfo(
    "CHEST", "Ischemic Chest Pain-(51)", "M",
    "50YOM, SOB, pale diaphoretic, history of cardiac")


@lru_cache(maxsize=1)
def bundled_model() -> OrderModel:
    records = load_records_csv(fixtures_dir() / "orders_records.csv")
    return train_orders(records, nn_core.TrainConfig(learning_rate=0.5, epochs=400))


@pytest.fixture(scope="module")
def model():
    return bundled_model()


@pytest.fixture(scope="module")
def records(fixtures):
    return load_records_csv(fixtures / "orders_records.csv")


def test_featurize_empty_dispatch_is_zero(model):
    x = featurize(DispatchInfo(), model.feature_map)
    assert not np.any(x)


def test_featurize_is_deterministic(model):
    a = featurize(EXAMPLE_DISPATCH, model.feature_map)
    b = featurize(EXAMPLE_DISPATCH, model.feature_map)
    np.testing.assert_array_equal(a, b)


def test_featurize_example_activates_expected_features():
    names = feature_names(EXAMPLE_DISPATCH)
    assert "type=chest" in names
    assert "nature=ischemic chest pain-(51)" in names
    assert "gender=M" in names
    # comment tokens appear as lemma features
    assert "comment:pale" in names
    assert "comment:cardiac" in names


def test_unknown_features_are_dropped(model):
    odd = DispatchInfo("CHEST", None, None, "zyzzyva unheard words")
    x = featurize(odd, model.feature_map)
    assert x[model.feature_map["type=chest"]] == 1.0
    assert x.sum() == pytest.approx(1.0 + len(
        [n for n in feature_names(odd) if n in model.feature_map and n != "type=chest"]))


def test_single_class_catalog_is_constant_predictor():
    records = [HistoricalRecord(DispatchInfo("CHEST", None, "M", "chest pain"),
                                "ONLY-ORDER")]
    model = train_orders(records, nn_core.TrainConfig(learning_rate=0.1, epochs=5))
    rec = recommend(model, EXAMPLE_DISPATCH, fixed_clock())
    assert rec.confidence_levels[-1].order == "ONLY-ORDER"
    assert rec.confidence_levels[-1].confidence == pytest.approx(1.0)


def test_missing_catalog_class_rejected():
    records = [HistoricalRecord(DispatchInfo("CHEST", None, "M", "x"), "A")]
    with pytest.raises(ValueError):
        train_orders(records, nn_core.TrainConfig(learning_rate=0.1, epochs=1),
                     catalog=("A", "B"))


def test_gradient_check():
    records = [
        HistoricalRecord(DispatchInfo("CHEST", "Ischemic", "M", "chest pain"), "A"),
        HistoricalRecord(DispatchInfo("BREATHING", "Distress", "F", "wheezing"), "B"),
        HistoricalRecord(DispatchInfo("TRAUMA", "Fall", "M", "fell down"), "C"),
    ]
    model = train_orders(records, nn_core.TrainConfig(learning_rate=0.2, epochs=3))
    names = sorted({n for r in records for n in feature_names(r.dispatch)})
    xs = [featurize(r.dispatch, model.feature_map) for r in records]
    ys = [model.catalog.index(r.order) for r in records]
    _, g_w, g_b = orders._mean_loss_and_grads(xs, ys, model)
    analytic = np.concatenate([g_w.ravel(), g_b.ravel()])

    def loss_at(vec):
        w = vec[:g_w.size].reshape(g_w.shape)
        b = vec[g_w.size:]
        candidate = OrderModel(model.feature_map, model.catalog, w, b)
        loss, _, _ = orders._mean_loss_and_grads(xs, ys, candidate)
        return loss

    vec = np.concatenate([model.weights.ravel(), model.bias.ravel()])
    numeric = nn_core.finite_diff_grad(loss_at, vec, h=1e-5)
    mask = np.abs(analytic) > 1e-10
    assert rel_err(analytic[mask], numeric[mask]) < 1e-4


def test_bundled_records_train_separably(records, model):
    assert orders.training_accuracy(records, model) >= 0.9


def test_recommendation_shape_and_invariants(model):
    rec = recommend(model, EXAMPLE_DISPATCH, fixed_clock())
    assert len(rec.confidence_levels) == 3
    assert rec.timestamp == "20190101T010101-000000"
    confidences = [c.confidence for c in rec.confidence_levels]
    assert confidences == sorted(confidences)
    assert sum(confidences) == pytest.approx(1.0, abs=1e-9)
    doc = rec.to_json()
    assert all(re.fullmatch(r"\d\.\d{3}", c["confidence"])
               for c in doc["confidence_levels"])
    assert doc["confidence_levels"][-1]["order"] == "CIMD-ACP-2019"


def test_gate_requires_minimum_information(model):
    with pytest.raises(InsufficientInformation):
        recommend(model, DispatchInfo(gender="F"), fixed_clock())
    with pytest.raises(InsufficientInformation):
        recommend(model, DispatchInfo(problem_nature_type="CHEST"), fixed_clock())
    # type + nature passes even without a comment
    rec = recommend(model, DispatchInfo("CHEST", "Ischemic Chest Pain-(51)", None, None),
                    fixed_clock())
    assert len(rec.confidence_levels) == 3


def test_recommend_is_pure(model):
    a = recommend(model, EXAMPLE_DISPATCH, fixed_clock())
    b = recommend(model, EXAMPLE_DISPATCH, fixed_clock())
    assert a == b


def test_update_same_dispatch_keeps_argmax_new_timestamp(model):
    prior = recommend(model, EXAMPLE_DISPATCH, fixed_clock())
    later = fixed_clock(datetime(2019, 1, 1, 2, 2, 2))
    rec, corrected = update_recommendation(model, prior, EXAMPLE_DISPATCH, later)
    assert not corrected
    assert rec.top_order() == prior.top_order()
    assert rec.timestamp == "20190101T020202-000000"


def test_update_flips_on_contradicting_evidence(model):
    prior = recommend(model, EXAMPLE_DISPATCH, fixed_clock())
    overdose = DispatchInfo(
        "CHEST", "Ischemic Chest Pain-(51)", "M",
        "found unresponsive suspected opioid overdose pinpoint pupils naloxone required")
    rec, corrected = update_recommendation(model, prior, overdose, fixed_clock())
    assert corrected
    assert rec.top_order() == "ACPE-ACP-2019"


def test_update_ignores_prior_for_probabilities(model):
    prior = recommend(model, EXAMPLE_DISPATCH, fixed_clock())
    fresh = recommend(model, EXAMPLE_DISPATCH, fixed_clock())
    updated, _ = update_recommendation(model, prior, EXAMPLE_DISPATCH, fixed_clock())
    assert updated.confidence_levels == fresh.confidence_levels


@settings(deadline=None, max_examples=60)
@given(st.sampled_from(["CHEST", "BREATHING", "UNCONSCIOUS", "ODD"]),
       st.sampled_from([None, "M", "F"]),
       st.text(alphabet="abcxyz ", min_size=1, max_size=24))
def test_every_emitted_recommendation_is_valid(type_, gender, comment):
    d = DispatchInfo(type_, None, gender, comment.strip() or "call")
    rec = recommend(bundled_model(), d, fixed_clock())
    confidences = [c.confidence for c in rec.confidence_levels]
    assert confidences == sorted(confidences)
    assert all(0.0 <= c <= 1.0 for c in confidences)
    assert sum(confidences) == pytest.approx(1.0, abs=1e-9)
    assert TS_PATTERN.match(rec.timestamp)


def test_model_serialization_round_trip(model, tmp_path):
    path = tmp_path / "orders.json"
    orders.save_model(path, model)
    loaded = orders.load_model(path)
    a = recommend(loaded, EXAMPLE_DISPATCH, fixed_clock())
    b = recommend(model, EXAMPLE_DISPATCH, fixed_clock())
    assert a == b
