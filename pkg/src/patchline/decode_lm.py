"""N-gram language model with add-k smoothing, CTC prefix beam search
with shallow LM fusion, and edit-distance lexicon rescoring of noisy
token streams (the custom-language-model half of the DIN lookup flow).
"""

from __future__ import annotations

import json
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field

import numpy as np

from .ctc import FrameProbs, NEG_INF

LM_FORMAT = "patchline-lm/1"
BOS = "<s>"
EOS = "</s>"


@dataclass
class DecodeConfig:
    beam_width: int = 3
    lm_weight: float = 1.0
    length_bonus: float = 0.0

    def __post_init__(self):
        if self.beam_width < 1:
            raise ValueError("beam_width must be >= 1")
        if self.lm_weight < 0:
            raise ValueError("lm_weight must be >= 0")


class NgramLm:
    """Add-k smoothed n-gram model over word tokens with sentence markers.

    Vocabulary is the training types plus the end marker; unknown tokens
    are scored with the smoothed floor for their context.
    """

    def __init__(self, n: int, k: float):
        if n < 1:
            raise ValueError("order must be >= 1")
        if k < 0:
            raise ValueError("smoothing constant must be >= 0")
        self.n = n
        self.k = k
        self.ngram_counts: Counter = Counter()
        self.context_counts: Counter = Counter()
        self.vocab: set = set()

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def _train_sentence(self, tokens) -> None:
        padded = [BOS] * (self.n - 1) + list(tokens) + [EOS]
        for i in range(self.n - 1, len(padded)):
            context = tuple(padded[i - self.n + 1:i])
            self.ngram_counts[context + (padded[i],)] += 1
            self.context_counts[context] += 1

    def prob(self, token: str, context) -> float:
        context = tuple(context)
        num = self.ngram_counts.get(context + (token,), 0) + self.k
        den = self.context_counts.get(context, 0) + self.k * self.vocab_size
        if den == 0:
            return 0.0
        return num / den

    def logprob(self, tokens) -> float:
        """Sum of log conditional probabilities, including the end marker."""
        padded = [BOS] * (self.n - 1) + list(tokens) + [EOS]
        total = 0.0
        for i in range(self.n - 1, len(padded)):
            p = self.prob(padded[i], padded[i - self.n + 1:i])
            if p == 0.0:
                return NEG_INF
            total += math.log(p)
        return total

    def prefix_logprob(self, tokens) -> float:
        """Like logprob but without the end-marker term: the running score
        of an unfinished sentence, monotone non-increasing as it grows."""
        padded = [BOS] * (self.n - 1) + list(tokens)
        total = 0.0
        for i in range(self.n - 1, len(padded)):
            p = self.prob(padded[i], padded[i - self.n + 1:i])
            if p == 0.0:
                return NEG_INF
            total += math.log(p)
        return total

    def to_json(self) -> dict:
        return {
            "format": LM_FORMAT,
            "n": self.n,
            "k": self.k,
            "counts": {
                "ngrams": {" ".join(g): c for g, c in sorted(self.ngram_counts.items())},
                "contexts": {" ".join(g): c for g, c in sorted(self.context_counts.items())},
            },
            "vocab": sorted(self.vocab),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "NgramLm":
        if doc.get("format") != LM_FORMAT:
            raise ValueError(f"unsupported LM format: {doc.get('format')!r}")
        lm = cls(doc["n"], doc["k"])
        lm.ngram_counts = Counter(
            {tuple(g.split(" ")): c for g, c in doc["counts"]["ngrams"].items()})
        lm.context_counts = Counter(
            {tuple(g.split(" ")): c for g, c in doc["counts"]["contexts"].items()})
        lm.vocab = set(doc["vocab"])
        return lm

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> "NgramLm":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def train_lm(corpus, n: int = 2, k: float = 1.0) -> NgramLm:
    """Estimate an add-k model from a list of sentence strings."""
    corpus = list(corpus)
    if not corpus:
        raise ValueError("corpus must be nonempty")
    lm = NgramLm(n, k)
    tokenized = [s.split() for s in corpus]
    for tokens in tokenized:
        lm.vocab.update(tokens)
    lm.vocab.add(EOS)
    for tokens in tokenized:
        lm._train_sentence(tokens)
    return lm


def lm_logprob(lm: NgramLm, tokens) -> float:
    return lm.logprob(tokens)


def _words(text: str):
    return [w for w in text.split(" ") if w]


def _completed_words(text: str):
    parts = text.split(" ")
    return [w for w in parts[:-1] if w]


def _beam_pass(fp: FrameProbs, lm: NgramLm | None, cfg: DecodeConfig, width: int):
    """One prefix-beam pass at a fixed width.

    Blank-ending and non-blank-ending path masses are tracked separately
    per prefix so that repeats merge exactly as the collapse rule says.
    Returns (best prefix, its combined score, whether pruning happened).
    """
    alphabet = fp.alphabet
    blank = alphabet.blank_index
    with np.errstate(divide="ignore"):
        log_probs = np.log(fp.probs)

    alpha, beta = cfg.lm_weight, cfg.length_bonus

    def partial_lm(prefix) -> float:
        if lm is None or alpha == 0.0:
            return 0.0
        return lm.prefix_logprob(_completed_words(alphabet.to_text(prefix)))

    def final_lm(prefix) -> float:
        if lm is None or alpha == 0.0:
            return 0.0
        return lm.logprob(_words(alphabet.to_text(prefix)))

    # prefix -> [log mass ending in blank, log mass ending in non-blank]
    beams = {(): [0.0, NEG_INF]}
    pruned = False
    for t in range(fp.T):
        nxt: dict = defaultdict(lambda: [NEG_INF, NEG_INF])
        for prefix, (b, nb) in beams.items():
            total = np.logaddexp(b, nb)
            # emit blank: prefix unchanged, now blank-ending
            entry = nxt[prefix]
            entry[0] = np.logaddexp(entry[0], total + log_probs[t, blank])
            # re-emit last symbol: merges into the same prefix
            if prefix:
                entry[1] = np.logaddexp(entry[1], nb + log_probs[t, prefix[-1]])
            for s in range(len(alphabet.symbols)):
                ext = prefix + (s,)
                if prefix and s == prefix[-1]:
                    # only the blank-ending mass extends to a repeated label
                    mass = b + log_probs[t, s]
                else:
                    mass = total + log_probs[t, s]
                entry2 = nxt[ext]
                entry2[1] = np.logaddexp(entry2[1], mass)

        def rank(item):
            prefix, (b, nb) = item
            score = np.logaddexp(b, nb) + alpha * partial_lm(prefix) + beta * len(prefix)
            return (-score, prefix)

        if len(nxt) > width:
            pruned = True
        beams = dict(sorted(nxt.items(), key=rank)[:width])

    def final_score(prefix, masses) -> float:
        b, nb = masses
        return float(np.logaddexp(b, nb) + alpha * final_lm(prefix) + beta * len(prefix))

    best_prefix = min(beams, key=lambda p: (-final_score(p, beams[p]), p))
    return best_prefix, final_score(best_prefix, beams[best_prefix]), pruned


def beam_decode(fp: FrameProbs, lm: NgramLm | None, cfg: DecodeConfig):
    """Decode the lattice by prefix beam search with shallow LM fusion.

    The combined score is log P_ctc + lm_weight * log P_lm +
    length_bonus * len; ties break lexicographically by prefix.

    A plain single-width pass is not monotone in beam width (a wider beam
    can prune the narrow pass's survivor mid-search), so when pruning
    occurred the narrower widths are swept as well and the best final
    hypothesis wins. That makes the returned score non-decreasing in
    beam_width by construction; when the width covers every candidate the
    single pass is already exact and is returned directly.

    Returns (transcript, combined score).
    """
    if cfg.beam_width < 1:
        raise ValueError("beam_width must be >= 1")
    best_prefix, best_score, pruned = _beam_pass(fp, lm, cfg, cfg.beam_width)
    if pruned:
        for width in range(1, cfg.beam_width):
            prefix, score, _ = _beam_pass(fp, lm, cfg, width)
            if score > best_score or (score == best_score and prefix < best_prefix):
                best_prefix, best_score = prefix, score
    return fp.alphabet.to_text(best_prefix), best_score


def edit_distance(a: str, b: str) -> int:
    """Unit-cost Levenshtein distance."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


@dataclass
class Lexicon:
    """Canonical keyword registry; matching is case-insensitive but the
    stored spelling is what replacements emit."""

    entries: tuple
    max_edit: int = 2
    _by_key: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.entries = tuple(self.entries)
        if not self.entries:
            raise ValueError("lexicon must be nonempty")
        self._by_key = {}
        for e in self.entries:
            self._by_key.setdefault(e.lower(), e)

    @property
    def keys(self):
        return tuple(self._by_key)

    def lookup(self, token: str):
        return self._by_key.get(token.lower())


def load_lexicon(path, max_edit: int = 2) -> Lexicon:
    with open(path, encoding="utf-8") as fh:
        entries = [line.strip() for line in fh if line.strip()]
    return Lexicon(tuple(entries), max_edit)


def rescore_tokens(tokens, lexicon: Lexicon):
    """Snap each token to its unique nearest lexicon entry within
    max_edit; equidistant candidates leave the token unchanged (never
    fabricate a drug name on ambiguity)."""
    out = []
    for token in tokens:
        if lexicon.lookup(token) is not None:
            out.append(token)
            continue
        low = token.lower()
        best_d = lexicon.max_edit + 1
        best = []
        for key in lexicon.keys:
            d = edit_distance(low, key)
            if d < best_d:
                best_d, best = d, [key]
            elif d == best_d:
                best.append(key)
        if len(best) == 1 and best_d <= lexicon.max_edit:
            out.append(lexicon._by_key[best[0]])
        else:
            out.append(token)
    return out


@dataclass
class KeywordMetrics:
    found: list
    missed: list
    percent: float

    @property
    def total(self) -> int:
        return len(self.found) + len(self.missed)


def keyword_score(text: str, keywords) -> KeywordMetrics:
    """Case-insensitive containment count of each keyword in the text."""
    keywords = list(keywords)
    if not keywords:
        raise ValueError("keywords must be nonempty")
    low = text.lower()
    found = [k for k in keywords if k.lower() in low]
    missed = [k for k in keywords if k.lower() not in low]
    percent = round(100.0 * len(found) / len(keywords), 2)
    return KeywordMetrics(found, missed, percent)
