"""Minimal dense numerical kernel: LSTM cell, bidirectional encoding,
softmax/cross-entropy, SGD and finite-difference gradient checking.

Everything is float64 and pure-function style: no operation mutates its
inputs, so values can be shared freely across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

MODEL_FORMAT = "patchline-nn/1"


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def softmax(v):
    """Stable softmax: positive outputs summing to 1."""
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("softmax input must be finite")
    e = np.exp(v - np.max(v))
    return e / np.sum(e)


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class LstmParams:
    """Gate weights for one LSTM cell: input (i), forget (f), output (o)
    and candidate (g) gates, each with input and recurrent matrices."""

    input_dim: int
    hidden_dim: int
    w_xi: np.ndarray = field(repr=False, default=None)
    w_hi: np.ndarray = field(repr=False, default=None)
    b_i: np.ndarray = field(repr=False, default=None)
    w_xf: np.ndarray = field(repr=False, default=None)
    w_hf: np.ndarray = field(repr=False, default=None)
    b_f: np.ndarray = field(repr=False, default=None)
    w_xo: np.ndarray = field(repr=False, default=None)
    w_ho: np.ndarray = field(repr=False, default=None)
    b_o: np.ndarray = field(repr=False, default=None)
    w_xg: np.ndarray = field(repr=False, default=None)
    w_hg: np.ndarray = field(repr=False, default=None)
    b_g: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        d, h = self.input_dim, self.hidden_dim
        for name in ("i", "f", "o", "g"):
            wx = getattr(self, f"w_x{name}")
            wh = getattr(self, f"w_h{name}")
            b = getattr(self, f"b_{name}")
            if wx is None:
                wx = np.zeros((h, d))
                setattr(self, f"w_x{name}", wx)
            if wh is None:
                wh = np.zeros((h, h))
                setattr(self, f"w_h{name}", wh)
            if b is None:
                b = np.zeros(h)
                setattr(self, f"b_{name}", b)
            if wx.shape != (h, d) or wh.shape != (h, h) or b.shape != (h,):
                raise ValueError("LSTM parameter shapes inconsistent with dims")


@dataclass
class LstmState:
    hidden: np.ndarray
    cell: np.ndarray

    @classmethod
    def zeros(cls, hidden_dim: int) -> "LstmState":
        return cls(np.zeros(hidden_dim), np.zeros(hidden_dim))


def init_lstm_params(input_dim: int, hidden_dim: int, rng: np.random.Generator) -> LstmParams:
    """Uniform init in [-0.1, 0.1] from the supplied generator."""
    def u(*shape):
        return rng.uniform(-0.1, 0.1, size=shape)

    return LstmParams(
        input_dim, hidden_dim,
        u(hidden_dim, input_dim), u(hidden_dim, hidden_dim), u(hidden_dim),
        u(hidden_dim, input_dim), u(hidden_dim, hidden_dim), u(hidden_dim),
        u(hidden_dim, input_dim), u(hidden_dim, hidden_dim), u(hidden_dim),
        u(hidden_dim, input_dim), u(hidden_dim, hidden_dim), u(hidden_dim),
    )


def lstm_step(params: LstmParams, state: LstmState, x) -> LstmState:
    """One LSTM step with sigmoid gates and tanh candidate/output."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (params.input_dim,):
        raise ValueError(f"expected input of dim {params.input_dim}, got shape {x.shape}")
    if state.hidden.shape != (params.hidden_dim,) or state.cell.shape != (params.hidden_dim,):
        raise ValueError("state dims do not match hidden_dim")
    h, c = state.hidden, state.cell
    i = sigmoid(params.w_xi @ x + params.w_hi @ h + params.b_i)
    f = sigmoid(params.w_xf @ x + params.w_hf @ h + params.b_f)
    o = sigmoid(params.w_xo @ x + params.w_ho @ h + params.b_o)
    g = np.tanh(params.w_xg @ x + params.w_hg @ h + params.b_g)
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return LstmState(h_new, c_new)


def birnn_encode(fwd: LstmParams, bwd: LstmParams, seq) -> np.ndarray:
    """Bidirectional encoding: row t is [forward hidden at t, backward
    hidden at t], so every output row depends on the whole sequence."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2:
        seq = seq.reshape(len(seq), -1)
    T = seq.shape[0]
    if T == 0:
        return np.zeros((0, fwd.hidden_dim + bwd.hidden_dim))
    fwd_h = []
    state = LstmState.zeros(fwd.hidden_dim)
    for t in range(T):
        state = lstm_step(fwd, state, seq[t])
        fwd_h.append(state.hidden)
    bwd_h = [None] * T
    state = LstmState.zeros(bwd.hidden_dim)
    for t in reversed(range(T)):
        state = lstm_step(bwd, state, seq[t])
        bwd_h[t] = state.hidden
    return np.stack([np.concatenate([fwd_h[t], bwd_h[t]]) for t in range(T)])


def softmax_cross_entropy(logits, target_index: int):
    """Cross-entropy of softmax(logits) against a one-hot target.

    Returns (loss, gradient w.r.t. logits); the analytic gradient is
    softmax(logits) - onehot, which the tests check against finite
    differences.
    """
    p = softmax(logits)
    loss = -np.log(max(p[target_index], 1e-300))
    grad = p.copy()
    grad[target_index] -= 1.0
    return loss, grad


def finite_diff_grad(loss_fn, params, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of loss_fn over a flat parameter vector."""
    if h <= 0:
        raise ValueError("h must be positive")
    params = np.asarray(params, dtype=np.float64)
    grad = np.zeros_like(params)
    for k in range(params.size):
        bumped = params.copy()
        bumped[k] += h
        up = loss_fn(bumped)
        bumped[k] -= 2 * h
        down = loss_fn(bumped)
        grad[k] = (up - down) / (2 * h)
    return grad


def sgd_step(params, grads, learning_rate: float):
    """p <- p - lr * g, elementwise. Accepts an array or a list of arrays."""
    if isinstance(params, (list, tuple)):
        if len(params) != len(grads):
            raise ValueError("params/grads length mismatch")
        return [sgd_step(p, g, learning_rate) for p, g in zip(params, grads)]
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise ValueError("params/grads shape mismatch")
    return params - learning_rate * grads


def save_model(path, dims: dict, weights: dict, meta: dict | None = None) -> None:
    """Write named weight arrays as a versioned JSON document."""
    doc = {
        "format": MODEL_FORMAT,
        "dims": dims,
        "weights": [
            {"name": name, "shape": list(arr.shape), "data": np.asarray(arr).ravel().tolist()}
            for name, arr in weights.items()
        ],
    }
    if meta:
        doc["meta"] = meta
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_model(path):
    """Read a model document; returns (dims, {name: array}, meta)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported model format: {doc.get('format')!r}")
    weights = {
        w["name"]: np.array(w["data"], dtype=np.float64).reshape(w["shape"])
        for w in doc["weights"]
    }
    return doc["dims"], weights, doc.get("meta", {})


def lstm_params_to_weights(params: LstmParams) -> dict:
    names = ["w_xi", "w_hi", "b_i", "w_xf", "w_hf", "b_f",
             "w_xo", "w_ho", "b_o", "w_xg", "w_hg", "b_g"]
    return {n: getattr(params, n) for n in names}


def save_lstm(path, params: LstmParams) -> None:
    save_model(path, {"input_dim": params.input_dim, "hidden_dim": params.hidden_dim},
               lstm_params_to_weights(params))


def load_lstm(path) -> LstmParams:
    dims, weights, _ = load_model(path)
    return LstmParams(dims["input_dim"], dims["hidden_dim"], **weights)
