"""Sentence classification with a small convolutional network over word
vectors: embedding, parallel convolutions of several filter widths,
max-over-time pooling and softmax. Trained full-batch for determinism;
embeddings are learned jointly with the filters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import nn_core

DEFAULT_LABELS = ("patient_status", "medical_history", "treatment_plan", "medication_reminder")
PAD, UNK = "<pad>", "<unk>"


@dataclass
class CnnConfig:
    embedding_dim: int = 32
    filter_widths: tuple = (3, 4, 5)
    feature_maps: int = 16
    seed: int = 0

    def __post_init__(self):
        self.filter_widths = tuple(sorted(self.filter_widths))
        if min(self.filter_widths) < 1 or self.embedding_dim < 1 or self.feature_maps < 1:
            raise ValueError("widths and dims must be >= 1")


@dataclass
class LabeledCorpus:
    examples: list           # (text, class index)
    vocab: dict              # token -> row index; includes <pad>=0, <unk>=1
    labels: tuple

    @classmethod
    def from_pairs(cls, pairs, labels=DEFAULT_LABELS) -> "LabeledCorpus":
        labels = tuple(labels)
        if len(labels) < 2 or len(set(labels)) != len(labels):
            raise ValueError("need >= 2 unique class names")
        examples = []
        seen = set()
        for text, idx in pairs:
            if not 0 <= idx < len(labels):
                raise ValueError(f"class index {idx} out of range")
            seen.update(_tokens(text))
            examples.append((text, idx))
        # sorted token order keeps the vocabulary (and therefore the seeded
        # embedding rows) independent of corpus ordering
        vocab = {PAD: 0, UNK: 1}
        for token in sorted(seen):
            vocab[token] = len(vocab)
        return cls(examples, vocab, labels)

    @classmethod
    def load_ndjson(cls, path, labels=DEFAULT_LABELS) -> "LabeledCorpus":
        labels = tuple(labels)
        index = {name: i for i, name in enumerate(labels)}
        pairs = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                doc = json.loads(line)
                if doc["label"] not in index:
                    raise ValueError(f"unknown label {doc['label']!r}")
                pairs.append((doc["text"], index[doc["label"]]))
        return cls.from_pairs(pairs, labels)


def _tokens(text: str):
    return text.lower().split()


@dataclass
class CnnParams:
    config: CnnConfig
    vocab: dict
    labels: tuple
    embeddings: np.ndarray          # (V, E)
    filters: list                   # per width: (F, w, E)
    filter_biases: list             # per width: (F,)
    affine_w: np.ndarray            # (K, F * n_widths)
    affine_b: np.ndarray            # (K,)

    def groups(self):
        yield "embeddings", self.embeddings
        for w, f in zip(self.config.filter_widths, self.filters):
            yield f"filters_w{w}", f
        for w, b in zip(self.config.filter_widths, self.filter_biases):
            yield f"filter_bias_w{w}", b
        yield "affine_w", self.affine_w
        yield "affine_b", self.affine_b

    def to_vector(self) -> np.ndarray:
        return np.concatenate([arr.ravel() for _, arr in self.groups()])

    def from_vector(self, vec: np.ndarray) -> "CnnParams":
        out = init_params(self.vocab, self.labels, self.config)
        offset = 0
        for (_, src), (_, dst) in zip(self.groups(), out.groups()):
            dst[...] = vec[offset:offset + src.size].reshape(src.shape)
            offset += src.size
        return out


def init_params(vocab: dict, labels, config: CnnConfig) -> CnnParams:
    rng = np.random.default_rng(config.seed)
    E, F = config.embedding_dim, config.feature_maps
    n_classes = len(labels)
    pooled_dim = F * len(config.filter_widths)
    return CnnParams(
        config=config,
        vocab=dict(vocab),
        labels=tuple(labels),
        embeddings=rng.uniform(-0.1, 0.1, (len(vocab), E)),
        filters=[rng.uniform(-0.1, 0.1, (F, w, E)) for w in config.filter_widths],
        filter_biases=[np.zeros(F) for _ in config.filter_widths],
        affine_w=rng.uniform(-0.1, 0.1, (n_classes, pooled_dim)),
        affine_b=np.zeros(n_classes),
    )


def sentence_indices(text: str, vocab: dict, min_len: int):
    idx = [vocab.get(t, vocab[UNK]) for t in _tokens(text)]
    while len(idx) < min_len:
        idx.append(vocab[PAD])
    return idx


def embed_sentence(text: str, vocab: dict, table: np.ndarray,
                   min_len: int = 1) -> np.ndarray:
    """Token rows from the embedding table, padded to at least min_len
    (unknown tokens share the <unk> row)."""
    return table[sentence_indices(text, vocab, min_len)]


def _forward(matrix: np.ndarray, params: CnnParams):
    """Returns (probs, cache) for one embedded sentence."""
    acts, argmaxes, pooled = [], [], []
    for filters, bias in zip(params.filters, params.filter_biases):
        F, w, E = filters.shape
        positions = matrix.shape[0] - w + 1
        windows = np.lib.stride_tricks.sliding_window_view(matrix, (w, E))[:, 0]
        pre = np.einsum("pwe,fwe->pf", windows, filters) + bias
        act = np.tanh(pre)
        arg = np.argmax(act, axis=0)
        acts.append(act)
        argmaxes.append(arg)
        pooled.append(act[arg, np.arange(F)])
    z = np.concatenate(pooled)
    logits = params.affine_w @ z + params.affine_b
    probs = nn_core.softmax(logits)
    return probs, (matrix, acts, argmaxes, z)


def cnn_forward(matrix: np.ndarray, params: CnnParams) -> np.ndarray:
    """Class probabilities for an embedded sentence (rows >= max width)."""
    if matrix.shape[0] < max(params.config.filter_widths):
        raise ValueError("matrix must have at least max-filter-width rows")
    probs, _ = _forward(matrix, params)
    return probs


def _example_loss_and_grads(text: str, target: int, params: CnnParams):
    min_len = max(params.config.filter_widths)
    indices = sentence_indices(text, params.vocab, min_len)
    matrix = params.embeddings[indices]
    probs, (_, acts, argmaxes, z) = _forward(matrix, params)
    loss = -np.log(max(probs[target], 1e-300))
    dlogits = probs.copy()
    dlogits[target] -= 1.0

    g_affine_w = np.outer(dlogits, z)
    g_affine_b = dlogits
    dz = params.affine_w.T @ dlogits

    g_emb = np.zeros_like(params.embeddings)
    g_filters = [np.zeros_like(f) for f in params.filters]
    g_fbias = [np.zeros_like(b) for b in params.filter_biases]
    d_matrix = np.zeros_like(matrix)

    offset = 0
    for gi, (filters, act, arg) in enumerate(zip(params.filters, acts, argmaxes)):
        F, w, E = filters.shape
        dpooled = dz[offset:offset + F]
        offset += F
        for f in range(F):
            p = arg[f]
            dpre = dpooled[f] * (1.0 - act[p, f] ** 2)
            g_filters[gi][f] += dpre * matrix[p:p + w]
            g_fbias[gi][f] += dpre
            d_matrix[p:p + w] += dpre * filters[f]
    for row, idx in enumerate(indices):
        g_emb[idx] += d_matrix[row]

    return loss, (g_emb, g_filters, g_fbias, g_affine_w, g_affine_b)


def mean_loss_and_grads(examples, params: CnnParams):
    """Mean cross-entropy and gradients over the corpus.

    Distinct examples are summed in a canonical order with their
    multiplicities, so the result is bitwise independent of corpus
    ordering and of exact duplication.
    """
    counts: dict = {}
    for ex in examples:
        counts[ex] = counts.get(ex, 0) + 1
    n = len(examples)
    total = 0.0
    g_emb = np.zeros_like(params.embeddings)
    g_filters = [np.zeros_like(f) for f in params.filters]
    g_fbias = [np.zeros_like(b) for b in params.filter_biases]
    g_aw = np.zeros_like(params.affine_w)
    g_ab = np.zeros_like(params.affine_b)
    for (text, target), count in sorted(counts.items(), key=lambda kv: (kv[0][1], kv[0][0])):
        loss, (ge, gf, gb, gaw, gab) = _example_loss_and_grads(text, target, params)
        total += count * loss
        g_emb += count * ge
        for a, b in zip(g_filters, gf):
            a += count * b
        for a, b in zip(g_fbias, gb):
            a += count * b
        g_aw += count * gaw
        g_ab += count * gab
    scale = 1.0 / n
    return total * scale, (g_emb * scale, [g * scale for g in g_filters],
                           [g * scale for g in g_fbias], g_aw * scale, g_ab * scale)


def train_classifier(corpus: LabeledCorpus, cfg: CnnConfig, tc: nn_core.TrainConfig):
    """Full-batch SGD on mean cross-entropy; deterministic under the seeds.

    Returns (params, loss trajectory) with one loss value per epoch.
    """
    counts = [0] * len(corpus.labels)
    for _, idx in corpus.examples:
        counts[idx] += 1
    empty = [corpus.labels[i] for i, c in enumerate(counts) if c == 0]
    if empty:
        raise ValueError(f"classes without examples: {empty}")

    params = init_params(corpus.vocab, corpus.labels, cfg)
    trajectory = []
    for _ in range(tc.epochs):
        loss, (ge, gf, gb, gaw, gab) = mean_loss_and_grads(corpus.examples, params)
        trajectory.append(loss)
        lr = tc.learning_rate
        params.embeddings = params.embeddings - lr * ge
        params.filters = [f - lr * g for f, g in zip(params.filters, gf)]
        params.filter_biases = [b - lr * g for b, g in zip(params.filter_biases, gb)]
        params.affine_w = params.affine_w - lr * gaw
        params.affine_b = params.affine_b - lr * gab
    return params, trajectory


def classify(sentence: str, params: CnnParams, labels=None):
    """Predicted label and the probability vector; argmax ties resolve to
    the lower class index."""
    labels = tuple(labels) if labels is not None else params.labels
    min_len = max(params.config.filter_widths)
    matrix = embed_sentence(sentence, params.vocab, params.embeddings, min_len)
    probs = cnn_forward(matrix, params)
    return labels[int(np.argmax(probs))], probs


def training_accuracy(corpus: LabeledCorpus, params: CnnParams) -> float:
    hits = 0
    for text, target in corpus.examples:
        label, _ = classify(text, params)
        hits += int(label == corpus.labels[target])
    return hits / len(corpus.examples)


def save_params(path, params: CnnParams) -> None:
    weights = dict(params.groups())
    dims = {
        "embedding_dim": params.config.embedding_dim,
        "feature_maps": params.config.feature_maps,
        "vocab_size": len(params.vocab),
        "classes": len(params.labels),
    }
    meta = {
        "vocab": params.vocab,
        "labels": list(params.labels),
        "filter_widths": list(params.config.filter_widths),
        "seed": params.config.seed,
    }
    nn_core.save_model(path, dims, weights, meta)


def load_params(path) -> CnnParams:
    dims, weights, meta = nn_core.load_model(path)
    config = CnnConfig(dims["embedding_dim"], tuple(meta["filter_widths"]),
                       dims["feature_maps"], meta.get("seed", 0))
    params = init_params(meta["vocab"], tuple(meta["labels"]), config)
    params.embeddings = weights["embeddings"]
    params.filters = [weights[f"filters_w{w}"] for w in config.filter_widths]
    params.filter_biases = [weights[f"filter_bias_w{w}"] for w in config.filter_widths]
    params.affine_w = weights["affine_w"]
    params.affine_b = weights["affine_b"]
    return params
