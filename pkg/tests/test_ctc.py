import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from patchline import ctc
from patchline.ctc import (Alphabet, FrameProbs, InfeasibleTarget, OracleBoundsError,
                           all_targets, collapse, ctc_grad, ctc_loss,
                           enumerate_oracle, min_frames)

from conftest import random_frame_probs, rel_err

AB = Alphabet(("a", "b"))


def labels_of(text):
    return AB.to_labels(text)


def path_of(text):
    # '-' is the blank
    return tuple(AB.blank_index if ch == "-" else AB.to_labels(ch)[0] for ch in text)


def test_collapse_merges_then_removes_blanks():
    assert collapse(path_of("aa-b"), AB) == labels_of("ab")
    assert collapse(path_of("a-a"), AB) == labels_of("aa")
    assert collapse((), AB) == ()


def test_collapse_rejects_bad_index():
    with pytest.raises(ValueError):
        collapse((7,), AB)


@given(st.lists(st.integers(0, 2), max_size=12))
def test_collapse_idempotent_on_canonical_reencoding(path):
    out = collapse(path, AB)
    # canonical encoding: a blank between equal neighbours, as the rule needs
    reencoded = []
    for prev, cur in zip((None,) + out, out):
        if prev == cur:
            reencoded.append(AB.blank_index)
        reencoded.append(cur)
    assert collapse(reencoded, AB) == out
    if all(x != y for x, y in zip(out, out[1:])):
        assert collapse(out, AB) == out


def test_loss_uniform_two_frame_example():
    # paths {aa, a-, -a}, each 0.25
    fp = FrameProbs(Alphabet(("a",)), [[0.5, 0.5], [0.5, 0.5]])
    assert ctc_loss(fp, (0,)) == pytest.approx(-math.log(0.75), abs=1e-12)


def test_loss_empty_target_is_all_blank_path():
    rng = np.random.default_rng(0)
    fp = random_frame_probs(rng, max_t=5)
    expected = -float(np.sum(np.log(fp.probs[:, fp.alphabet.blank_index])))
    assert ctc_loss(fp, ()) == pytest.approx(expected, abs=1e-12)


def test_infeasible_target_returns_sentinel():
    fp = FrameProbs(Alphabet(("a",)), [[0.5, 0.5]])
    assert min_frames((0, 0)) == 3
    assert ctc_loss(fp, (0, 0)) == math.inf


def test_zero_frame_lattice():
    fp = FrameProbs(Alphabet(("a",)), np.zeros((0, 2)))
    assert ctc_loss(fp, ()) == 0.0
    assert ctc_loss(fp, (0,)) == math.inf


def test_loss_matches_enumeration_oracle():
    rng = np.random.default_rng(101)
    for _ in range(40):
        fp = random_frame_probs(rng)
        for target in all_targets(fp.alphabet, 3):
            got = ctc_loss(fp, target)
            want = enumerate_oracle(fp, target)
            if math.isinf(want):
                assert got == math.inf
            else:
                assert got == pytest.approx(want, abs=1e-9)


def fd_grad(fp, target):
    # the loss is -log of a polynomial in each entry, so its curvature grows
    # like 1/p^3: the central-difference step must scale with the entry or
    # truncation (large h) and roundoff (small h) both wreck the estimate
    blank = fp.alphabet.blank_index
    g = np.zeros_like(fp.probs)
    for t in range(fp.T):
        for k in range(fp.probs.shape[1]):
            h = max(1e-3 * fp.probs[t, k], 1e-8)
            up = fp.probs.copy()
            up[t, k] += h
            down = fp.probs.copy()
            down[t, k] -= h
            g[t, k] = (-ctc.log_prob_array(up, target, blank)
                       + ctc.log_prob_array(down, target, blank)) / (2 * h)
    return g


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(7)
    for _ in range(15):
        fp = random_frame_probs(rng, min_t=2)
        for target in [(0,), (0, 1), (1, 0)]:
            if min_frames(target) > fp.T:
                continue
            grad = ctc_grad(fp, target)
            fd = fd_grad(fp, target)
            mask = np.abs(grad) > 1e-8
            if mask.any():
                assert rel_err(grad[mask], fd[mask]) < 1e-6


def test_gradient_of_uniform_example_matches_finite_differences():
    fp = FrameProbs(Alphabet(("a",)), [[0.5, 0.5], [0.5, 0.5]])
    grad = ctc_grad(fp, (0,))
    fd = fd_grad(fp, (0,))
    assert rel_err(grad, fd) < 1e-6


def test_gradient_pushes_required_symbol_up():
    # every collapsing path must emit 'a' in frame 0: negative partial
    fp = FrameProbs(Alphabet(("a",)), [[0.9, 0.1], [0.1, 0.9]])
    grad = ctc_grad(fp, (0,))
    assert grad[0, 0] < 0.0


def test_gradient_rejects_infeasible_target():
    fp = FrameProbs(Alphabet(("a",)), [[0.5, 0.5]])
    with pytest.raises(InfeasibleTarget):
        ctc_grad(fp, (0, 0))


def test_oracle_refuses_unbounded_instances():
    big = FrameProbs(Alphabet(("a",)), np.full((9, 2), 0.5))
    with pytest.raises(OracleBoundsError):
        enumerate_oracle(big, (0,))
    wide = FrameProbs(Alphabet(("a", "b", "c", "d")), np.full((2, 5), 0.2))
    with pytest.raises(OracleBoundsError):
        enumerate_oracle(wide, (0,))


def test_oracle_certain_blank_gives_zero_loss():
    fp = FrameProbs(Alphabet(("a",)), [[0.0, 1.0], [0.0, 1.0]])
    assert enumerate_oracle(fp, ()) == pytest.approx(0.0, abs=0)


def test_oracle_impossible_target_sentinel():
    fp = FrameProbs(Alphabet(("a",)), [[0.0, 1.0]])
    assert enumerate_oracle(fp, (0,)) == math.inf


def test_target_probabilities_are_disjoint_events():
    rng = np.random.default_rng(55)
    for _ in range(10):
        fp = random_frame_probs(rng)
        total = sum(
            math.exp(-loss)
            for target in all_targets(fp.alphabet, fp.T)
            for loss in [ctc_loss(fp, target)]
            if not math.isinf(loss))
        assert total <= 1.0 + 1e-9
        assert total == pytest.approx(1.0, abs=1e-9)


def test_frame_probs_validation():
    with pytest.raises(ValueError):
        FrameProbs(AB, [[0.5, 0.4, 0.2]])
    with pytest.raises(ValueError):
        FrameProbs(AB, [[1.2, -0.1, -0.1]])


def test_fixture_round_trip(tmp_path):
    fp = FrameProbs(AB, [[0.2, 0.3, 0.5], [0.6, 0.1, 0.3]])
    path = tmp_path / "frames.json"
    ctc.save_frame_probs(path, fp)
    loaded = ctc.load_frame_probs(path)
    assert loaded.alphabet == fp.alphabet
    np.testing.assert_array_equal(loaded.probs, fp.probs)
