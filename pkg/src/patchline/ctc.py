"""Connectionist Temporal Classification: path collapse, exact loss via
log-space forward-backward, analytic gradient, and a brute-force path
enumeration oracle for bounded instances.

The collapse rule: merge adjacent duplicate symbols first, then drop
blanks. Loss is -ln of the total probability of all frame paths that
collapse to the target.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

NEG_INF = -math.inf


class InfeasibleTarget(Exception):
    """Target needs more frames than the lattice provides."""


class OracleBoundsError(Exception):
    """Enumeration refused: alphabet or frame count too large."""


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple
    blank_char: str = "-"

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(self.symbols))
        if self.blank_char in self.symbols:
            raise ValueError("blank must not be among the symbols")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("duplicate symbols")

    @property
    def blank_index(self) -> int:
        return len(self.symbols)

    @property
    def size(self) -> int:
        # symbols plus blank
        return len(self.symbols) + 1

    def to_text(self, labels) -> str:
        return "".join(self.symbols[i] for i in labels)

    def to_labels(self, text: str) -> tuple:
        index = {s: i for i, s in enumerate(self.symbols)}
        return tuple(index[ch] for ch in text)


@dataclass
class FrameProbs:
    """Per-frame probability rows over symbols + blank (blank column last)."""

    alphabet: Alphabet
    probs: np.ndarray

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        if self.probs.ndim != 2 or self.probs.shape[1] != self.alphabet.size:
            raise ValueError("probs must be (T, |symbols|+1)")
        if np.any(self.probs < 0) or np.any(self.probs > 1):
            raise ValueError("probabilities must lie in [0, 1]")
        if self.T and np.max(np.abs(self.probs.sum(axis=1) - 1.0)) > 1e-9:
            raise ValueError("each frame row must sum to 1")

    @property
    def T(self) -> int:
        return self.probs.shape[0]


def load_frame_probs(path) -> FrameProbs:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    alphabet = Alphabet(tuple(doc["alphabet"]), doc.get("blank", "-"))
    return FrameProbs(alphabet, np.array(doc["frames"], dtype=np.float64))


def save_frame_probs(path, fp: FrameProbs) -> None:
    doc = {
        "alphabet": list(fp.alphabet.symbols),
        "blank": fp.alphabet.blank_char,
        "frames": fp.probs.tolist(),
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def validate_labels(labels, alphabet: Alphabet) -> tuple:
    labels = tuple(int(l) for l in labels)
    for l in labels:
        if not 0 <= l < alphabet.blank_index:
            raise ValueError(f"label {l} out of range or blank")
    return labels


def collapse(path, alphabet: Alphabet) -> tuple:
    """Merge adjacent duplicates, then remove blanks."""
    out = []
    prev = None
    for idx in path:
        idx = int(idx)
        if not 0 <= idx <= alphabet.blank_index:
            raise ValueError(f"index {idx} outside alphabet")
        if idx != prev:
            out.append(idx)
        prev = idx
    return tuple(i for i in out if i != alphabet.blank_index)


def min_frames(labels) -> int:
    """Frames needed: one per label plus one blank between equal neighbours."""
    repeats = sum(1 for a, b in zip(labels, labels[1:]) if a == b)
    return len(labels) + repeats


def _extended(labels, blank: int):
    ext = [blank]
    for l in labels:
        ext.append(l)
        ext.append(blank)
    return ext


def _forward(log_probs: np.ndarray, ext) -> np.ndarray:
    """Alpha in log space; alpha[t, s] includes the emission at frame t."""
    T, S = log_probs.shape[0], len(ext)
    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = log_probs[0, ext[0]]
    if S > 1:
        alpha[0, 1] = log_probs[0, ext[1]]
    for t in range(1, T):
        for s in range(S):
            best = alpha[t - 1, s]
            if s >= 1:
                best = np.logaddexp(best, alpha[t - 1, s - 1])
            if s >= 2 and ext[s] != ext[s - 2]:
                best = np.logaddexp(best, alpha[t - 1, s - 2])
            alpha[t, s] = best + log_probs[t, ext[s]]
    return alpha


def _backward(log_probs: np.ndarray, ext) -> np.ndarray:
    """Beta in log space; beta[t, s] covers emissions strictly after t."""
    T, S = log_probs.shape[0], len(ext)
    beta = np.full((T, S), NEG_INF)
    beta[T - 1, S - 1] = 0.0
    if S > 1:
        beta[T - 1, S - 2] = 0.0
    for t in range(T - 2, -1, -1):
        for s in range(S):
            best = beta[t + 1, s] + log_probs[t + 1, ext[s]]
            if s + 1 < S:
                best = np.logaddexp(best, beta[t + 1, s + 1] + log_probs[t + 1, ext[s + 1]])
            if s + 2 < S and ext[s] != ext[s + 2]:
                best = np.logaddexp(best, beta[t + 1, s + 2] + log_probs[t + 1, ext[s + 2]])
            beta[t, s] = best
    return beta


def log_prob_array(probs: np.ndarray, labels, blank: int) -> float:
    """ln P(labels | lattice) for a raw probability array.

    Does not require normalised rows, which is what lets the gradient be
    checked by perturbing single entries.
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = tuple(labels)
    T = probs.shape[0]
    if min_frames(labels) > T:
        return NEG_INF
    if T == 0:
        return 0.0   # only the empty path, with probability 1
    with np.errstate(divide="ignore"):
        log_probs = np.log(probs)
    ext = _extended(labels, blank)
    alpha = _forward(log_probs, ext)
    S = len(ext)
    total = alpha[T - 1, S - 1]
    if S > 1:
        total = np.logaddexp(total, alpha[T - 1, S - 2])
    return float(total)


def ctc_loss(fp: FrameProbs, labels) -> float:
    """-ln of the summed probability of all paths collapsing to labels.

    Infeasible targets (too long for T) get the +inf sentinel rather than
    an exception: a decoder may legitimately score them.
    """
    labels = validate_labels(labels, fp.alphabet)
    if min_frames(labels) > fp.T:
        return math.inf
    return -log_prob_array(fp.probs, labels, fp.alphabet.blank_index)


def ctc_grad(fp: FrameProbs, labels) -> np.ndarray:
    """d(loss)/d(probs[t, k]) from forward-backward posteriors."""
    labels = validate_labels(labels, fp.alphabet)
    if min_frames(labels) > fp.T:
        raise InfeasibleTarget(f"target of length {len(labels)} needs more than {fp.T} frames")
    probs = fp.probs
    blank = fp.alphabet.blank_index
    with np.errstate(divide="ignore"):
        log_probs = np.log(probs)
    ext = _extended(labels, blank)
    T, S = fp.T, len(ext)
    alpha = _forward(log_probs, ext)
    beta = _backward(log_probs, ext)
    log_p = alpha[T - 1, S - 1]
    if S > 1:
        log_p = np.logaddexp(log_p, alpha[T - 1, S - 2])
    # alpha with frame t's own emission divided back out: the incoming mass
    # behind state s, which is the partial derivative w.r.t. that emission.
    grad = np.zeros_like(probs)
    for t in range(T):
        for s in range(S):
            if t == 0:
                incoming = 0.0 if s <= 1 else NEG_INF
            else:
                incoming = alpha[t - 1, s]
                if s >= 1:
                    incoming = np.logaddexp(incoming, alpha[t - 1, s - 1])
                if s >= 2 and ext[s] != ext[s - 2]:
                    incoming = np.logaddexp(incoming, alpha[t - 1, s - 2])
            contrib = incoming + beta[t, s]
            if contrib > NEG_INF:
                grad[t, ext[s]] -= math.exp(contrib - log_p)
    return grad


ORACLE_MAX_SIZE = 4   # symbols + blank
ORACLE_MAX_T = 8


def enumerate_oracle(fp: FrameProbs, labels) -> float:
    """Brute-force loss: sum over every possible frame path whose collapse
    equals the target. Only for small instances; refuses otherwise."""
    if fp.alphabet.size > ORACLE_MAX_SIZE or fp.T > ORACLE_MAX_T:
        raise OracleBoundsError(
            f"enumeration limited to size<={ORACLE_MAX_SIZE}, T<={ORACLE_MAX_T}")
    labels = validate_labels(labels, fp.alphabet)
    total = 0.0
    for path in itertools.product(range(fp.alphabet.size), repeat=fp.T):
        if collapse(path, fp.alphabet) == labels:
            p = 1.0
            for t, idx in enumerate(path):
                p *= fp.probs[t, idx]
            total += p
    if total == 0.0:
        return math.inf
    return -math.log(total)


def all_targets(alphabet: Alphabet, max_len: int):
    """All label sequences up to max_len, shortest first then lexicographic."""
    for length in range(max_len + 1):
        for combo in itertools.product(range(len(alphabet.symbols)), repeat=length):
            yield combo
