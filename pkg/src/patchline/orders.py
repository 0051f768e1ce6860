"""Standing-order recommender: one-hot + bag-of-lemmas featurization of
dispatch information, a softmax-regression classifier over the order
catalog, and gated recommendation with injected clock timestamps.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from . import nn_core
from .nlu_extract import default_lexicons, lemmatize, tokenize

TIMESTAMP_FORMAT = "%Y%m%dT%H%M%S-%f"


class InsufficientInformation(Exception):
    """The dispatch does not yet meet the minimum-information gate."""


@dataclass
class DispatchInfo:
    problem_nature_type: str | None = None
    problem_nature: str | None = None
    gender: str | None = None
    comment: str | None = None
    age: str | None = None   # optional; not part of the minimum-information gate

    @classmethod
    def from_dict(cls, data: dict) -> "DispatchInfo":
        return cls(
            problem_nature_type=data.get("problem_nature_type") or None,
            problem_nature=data.get("problem_nature") or None,
            gender=data.get("gender") or None,
            comment=data.get("comment") or None,
            age=str(data["age"]) if data.get("age") else None,
        )

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}

    def passes_gate(self) -> bool:
        # minimum information: the problem type plus either free-text
        # comment or the coded problem nature
        return bool(self.problem_nature_type) and bool(self.comment or self.problem_nature)


@dataclass
class HistoricalRecord:
    dispatch: DispatchInfo
    order: str


@dataclass
class OrderConfidence:
    order: str
    confidence: float


@dataclass
class Recommendation:
    confidence_levels: list      # ascending by confidence
    timestamp: str

    def top_order(self) -> str:
        return self.confidence_levels[-1].order

    def to_json(self) -> dict:
        return {
            "confidence_levels": [
                {"order": c.order, "confidence": f"{c.confidence:.3f}"}
                for c in self.confidence_levels
            ],
            "timestamp": self.timestamp,
        }


def feature_names(d: DispatchInfo):
    """Active feature names for a dispatch; categorical one-hots plus a
    bag of comment lemmas."""
    names = []
    if d.problem_nature_type:
        names.append(f"type={d.problem_nature_type.strip().lower()}")
    if d.problem_nature:
        names.append(f"nature={d.problem_nature.strip().lower()}")
    if d.gender:
        names.append(f"gender={d.gender.strip().upper()}")
    if d.age:
        names.append(f"age={d.age.strip()}")
    if d.comment:
        rules = default_lexicons().lemma
        for token in tokenize(d.comment.lower().replace(",", " ")):
            names.append(f"comment:{lemmatize(token, rules)}")
    return names


@dataclass
class OrderModel:
    feature_map: dict            # feature name -> column
    catalog: tuple               # order ids, fixed ordering
    weights: np.ndarray          # (orders, features)
    bias: np.ndarray             # (orders,)


def featurize(d: DispatchInfo, feature_map: dict) -> np.ndarray:
    """Dense indicator vector under a frozen feature map; names absent
    from the map are dropped rather than crashing."""
    x = np.zeros(len(feature_map))
    for name in feature_names(d):
        idx = feature_map.get(name)
        if idx is not None:
            x[idx] = 1.0
    return x


def _mean_loss_and_grads(xs, ys, model: OrderModel):
    n = len(ys)
    g_w = np.zeros_like(model.weights)
    g_b = np.zeros_like(model.bias)
    total = 0.0
    for x, y in zip(xs, ys):
        loss, dlogits = nn_core.softmax_cross_entropy(model.weights @ x + model.bias, y)
        total += loss
        g_w += np.outer(dlogits, x)
        g_b += dlogits
    return total / n, g_w / n, g_b / n


def train_orders(records, tc: nn_core.TrainConfig, catalog=None) -> OrderModel:
    """Multinomial softmax regression by full-batch gradient descent."""
    records = list(records)
    if not records:
        raise ValueError("no historical records")
    if catalog is None:
        catalog = tuple(sorted({r.order for r in records}))
    else:
        catalog = tuple(catalog)
    seen = {r.order for r in records}
    missing = [o for o in catalog if o not in seen]
    if missing:
        raise ValueError(f"catalog orders without records: {missing}")

    names = sorted({name for r in records for name in feature_names(r.dispatch)})
    feature_map = {name: i for i, name in enumerate(names)}
    model = OrderModel(feature_map, catalog,
                       np.zeros((len(catalog), len(names))), np.zeros(len(catalog)))

    order_index = {o: i for i, o in enumerate(catalog)}
    ordered = sorted(records, key=lambda r: (r.order, sorted(feature_names(r.dispatch))))
    xs = [featurize(r.dispatch, feature_map) for r in ordered]
    ys = [order_index[r.order] for r in ordered]
    for _ in range(tc.epochs):
        _, g_w, g_b = _mean_loss_and_grads(xs, ys, model)
        model.weights = model.weights - tc.learning_rate * g_w
        model.bias = model.bias - tc.learning_rate * g_b
    return model


def predict_confidences(model: OrderModel, d: DispatchInfo) -> np.ndarray:
    x = featurize(d, model.feature_map)
    return nn_core.softmax(model.weights @ x + model.bias)


def recommend(model: OrderModel, d: DispatchInfo, clock) -> Recommendation:
    """Ranked standing orders for a dispatch that passes the information
    gate; raises InsufficientInformation otherwise. The clock is injected
    (a callable returning a datetime) so outputs are reproducible."""
    if not d.passes_gate():
        raise InsufficientInformation(
            "need problem_nature_type plus a comment or problem_nature")
    probs = predict_confidences(model, d)
    levels = sorted(
        (OrderConfidence(order, float(p)) for order, p in zip(model.catalog, probs)),
        key=lambda c: (c.confidence, c.order))
    return Recommendation(levels, clock().strftime(TIMESTAMP_FORMAT))


def update_recommendation(model: OrderModel, prior: Recommendation,
                          d: DispatchInfo, clock):
    """Recompute from the updated dispatch; returns (recommendation,
    corrected) where corrected marks an argmax change from the prior."""
    rec = recommend(model, d, clock)
    return rec, rec.top_order() != prior.top_order()


def load_records_csv(path):
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(HistoricalRecord(
                DispatchInfo.from_dict(row), row["order"].strip()))
    return records


def training_accuracy(records, model: OrderModel) -> float:
    hits = 0
    for r in records:
        probs = predict_confidences(model, r.dispatch)
        hits += int(model.catalog[int(np.argmax(probs))] == r.order)
    return hits / len(records)


def save_model(path, model: OrderModel) -> None:
    nn_core.save_model(
        path,
        {"orders": len(model.catalog), "features": len(model.feature_map)},
        {"weights": model.weights, "bias": model.bias},
        {"feature_map": model.feature_map, "catalog": list(model.catalog)},
    )


def load_model(path) -> OrderModel:
    _, weights, meta = nn_core.load_model(path)
    return OrderModel(meta["feature_map"], tuple(meta["catalog"]),
                      weights["weights"], weights["bias"])
