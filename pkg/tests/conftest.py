import json

import numpy as np
import pytest

from patchline.ctc import Alphabet, FrameProbs
from patchline.service import fixtures_dir


@pytest.fixture(scope="session")
def fixtures():
    return fixtures_dir()


@pytest.fixture(scope="session")
def gold_rows(fixtures):
    with open(fixtures / "table3_gold.json", encoding="utf-8") as fh:
        return json.load(fh)


def rel_err(a, b):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)
    return np.max(np.abs(a - b) / scale)


def random_frame_probs(rng, n_symbols=2, max_t=6, min_t=1):
    """Random bounded lattice: dirichlet rows over symbols + blank."""
    alphabet = Alphabet(tuple("ab"[:n_symbols]))
    T = int(rng.integers(min_t, max_t + 1))
    return FrameProbs(alphabet, rng.dirichlet(np.ones(alphabet.size), size=T))
