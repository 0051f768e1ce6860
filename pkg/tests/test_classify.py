import math

import numpy as np
import pytest

from patchline import nn_core
from patchline.classify import (CnnConfig, LabeledCorpus, classify,
                                cnn_forward, embed_sentence, init_params,
                                load_params, mean_loss_and_grads, save_params,
                                train_classifier)

from conftest import rel_err

TOY_LABELS = ("red", "blue")


def toy_corpus():
    pairs = [
        ("alpha beta gamma", 0), ("alpha gamma delta", 0),
        ("beta alpha alpha", 0), ("gamma beta alpha", 0),
        ("omega psi chi", 1), ("psi chi omega", 1),
        ("chi omega psi psi", 1), ("omega omega chi", 1),
    ]
    return LabeledCorpus.from_pairs(pairs, TOY_LABELS)


def small_config(seed=0):
    return CnnConfig(embedding_dim=4, filter_widths=(2, 3), feature_maps=3, seed=seed)


def test_embed_empty_sentence_pads_to_max_width():
    corpus = toy_corpus()
    table = np.arange(len(corpus.vocab) * 4, dtype=float).reshape(-1, 4)
    matrix = embed_sentence("", corpus.vocab, table, min_len=5)
    assert matrix.shape == (5, 4)
    np.testing.assert_array_equal(matrix, np.tile(table[0], (5, 1)))


def test_embed_known_sentence_shape():
    corpus = toy_corpus()
    table = np.random.default_rng(0).normal(size=(len(corpus.vocab), 32))
    matrix = embed_sentence("alpha beta gamma delta psi", corpus.vocab, table)
    assert matrix.shape == (5, 32)


def test_embed_shared_tokens_share_rows():
    corpus = toy_corpus()
    table = np.random.default_rng(1).normal(size=(len(corpus.vocab), 8))
    a = embed_sentence("alpha beta", corpus.vocab, table, 2)
    b = embed_sentence("gamma beta", corpus.vocab, table, 2)
    np.testing.assert_array_equal(a[1], b[1])


def test_cnn_forward_zero_affine_is_uniform():
    corpus = toy_corpus()
    params = init_params(corpus.vocab, TOY_LABELS, small_config())
    params.affine_w[...] = 0.0
    params.affine_b[...] = 0.0
    matrix = embed_sentence("alpha beta gamma", corpus.vocab, params.embeddings, 3)
    probs = cnn_forward(matrix, params)
    np.testing.assert_allclose(probs, [0.5, 0.5], rtol=0)


def test_cnn_forward_probabilities_sum_to_one():
    corpus = toy_corpus()
    params = init_params(corpus.vocab, TOY_LABELS, small_config(seed=3))
    matrix = embed_sentence("alpha omega psi", corpus.vocab, params.embeddings, 3)
    assert abs(cnn_forward(matrix, params).sum() - 1.0) < 1e-12


def test_cnn_forward_matches_scalar_hand_evaluation():
    # 1 filter width, 1 feature map, hand-set weights on a 3-token toy
    vocab = {"<pad>": 0, "<unk>": 1, "u": 2, "v": 3, "w": 4}
    config = CnnConfig(embedding_dim=1, filter_widths=(2,), feature_maps=1, seed=0)
    params = init_params(vocab, TOY_LABELS, config)
    params.embeddings[...] = np.array([[0.0], [0.0], [0.5], [-0.25], [1.0]])
    params.filters[0][...] = np.array([[[2.0], [1.0]]])
    params.filter_biases[0][...] = np.array([0.1])
    params.affine_w[...] = np.array([[1.0], [-1.0]])
    params.affine_b[...] = np.array([0.2, -0.2])

    # windows: (u,v) -> 2*.5 + 1*(-.25) + .1 = .85 ; (v,w) -> -.5 + 1 + .1 = .6
    pooled = math.tanh(0.85)
    logits = [pooled + 0.2, -pooled - 0.2]
    expected = np.exp(logits) / np.sum(np.exp(logits))
    matrix = embed_sentence("u v w", vocab, params.embeddings, 2)
    np.testing.assert_allclose(cnn_forward(matrix, params), expected, rtol=1e-12)


def test_forward_requires_enough_rows():
    corpus = toy_corpus()
    params = init_params(corpus.vocab, TOY_LABELS, small_config())
    with pytest.raises(ValueError):
        cnn_forward(np.zeros((1, 4)), params)


def test_training_loss_non_increasing_on_separable_toy():
    corpus = toy_corpus()
    _, trajectory = train_classifier(
        corpus, small_config(seed=1),
        nn_core.TrainConfig(learning_rate=0.01, epochs=120, seed=1))
    for before, after in zip(trajectory, trajectory[1:]):
        assert after <= before + 1e-6


def test_full_gradient_check_against_finite_differences():
    corpus = toy_corpus()
    params = init_params(corpus.vocab, TOY_LABELS, small_config(seed=5))
    _, grads = mean_loss_and_grads(corpus.examples, params)
    g_emb, g_filters, g_fbias, g_aw, g_ab = grads
    analytic = np.concatenate([g_emb.ravel()]
                              + [g.ravel() for g in g_filters]
                              + [g.ravel() for g in g_fbias]
                              + [g_aw.ravel(), g_ab.ravel()])

    def loss_at(vector):
        candidate = params.from_vector(vector)
        loss, _ = mean_loss_and_grads(corpus.examples, candidate)
        return loss

    numeric = nn_core.finite_diff_grad(loss_at, params.to_vector(), h=1e-5)
    mask = np.abs(analytic) > 1e-10
    assert rel_err(analytic[mask], numeric[mask]) < 1e-4


def test_duplicate_corpus_trains_to_identical_params():
    corpus = toy_corpus()
    doubled = LabeledCorpus.from_pairs(
        [(t, i) for t, i in corpus.examples for _ in range(2)], TOY_LABELS)
    tc = nn_core.TrainConfig(learning_rate=0.05, epochs=40, seed=2)
    params_a, _ = train_classifier(corpus, small_config(seed=2), tc)
    params_b, _ = train_classifier(doubled, small_config(seed=2), tc)
    np.testing.assert_array_equal(params_a.embeddings, params_b.embeddings)
    np.testing.assert_array_equal(params_a.affine_w, params_b.affine_w)


def test_permuting_training_order_leaves_params_unchanged():
    corpus = toy_corpus()
    reversed_corpus = LabeledCorpus.from_pairs(
        list(reversed(corpus.examples)), TOY_LABELS)
    # vocab row order differs, so compare through predictions
    tc = nn_core.TrainConfig(learning_rate=0.05, epochs=60, seed=4)
    params_a, traj_a = train_classifier(corpus, small_config(seed=4), tc)
    params_b, traj_b = train_classifier(reversed_corpus, small_config(seed=4), tc)
    assert traj_a == traj_b
    for text, _ in corpus.examples:
        _, pa = classify(text, params_a)
        _, pb = classify(text, params_b)
        np.testing.assert_allclose(pa, pb, rtol=0, atol=1e-12)


def test_zero_example_class_rejected():
    corpus = LabeledCorpus.from_pairs([("alpha", 0)], TOY_LABELS)
    with pytest.raises(ValueError):
        train_classifier(corpus, small_config(),
                         nn_core.TrainConfig(learning_rate=0.1, epochs=1))


def test_uniform_params_tie_break_to_first_class():
    corpus = toy_corpus()
    params = init_params(corpus.vocab, TOY_LABELS, small_config())
    params.affine_w[...] = 0.0
    params.affine_b[...] = 0.0
    label, probs = classify("alpha omega", params)
    assert label == "red"
    assert abs(probs.sum() - 1.0) < 1e-12


def test_token_order_changes_prediction_across_filter_width():
    # a width-2 filter reading one-hot rows sees bigram order
    vocab = {"<pad>": 0, "<unk>": 1, "a": 2, "b": 3}
    config = CnnConfig(embedding_dim=2, filter_widths=(2,), feature_maps=1, seed=0)
    params = init_params(vocab, TOY_LABELS, config)
    params.embeddings[...] = np.array([[0.0, 0.0], [0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    params.filters[0][...] = np.array([[[3.0, 0.0], [0.0, 3.0]]])   # detects "a b"
    params.filter_biases[0][...] = np.array([-3.0])
    params.affine_w[...] = np.array([[4.0], [-4.0]])
    params.affine_b[...] = 0.0
    assert classify("a b", params)[0] == "red"
    assert classify("b a", params)[0] == "blue"


def test_bundled_fixture_trains_and_labels_treatment_line(fixtures):
    corpus = LabeledCorpus.load_ndjson(fixtures / "classifier_corpus.ndjson")
    assert len(corpus.examples) == 40
    params, _ = train_classifier(
        corpus, CnnConfig(seed=7),
        nn_core.TrainConfig(learning_rate=0.5, epochs=500, seed=7))
    label, _ = classify("requesting treatment of additional nitroglycerin", params)
    assert label == "treatment_plan"


def test_params_serialization_round_trip(tmp_path):
    corpus = toy_corpus()
    params, _ = train_classifier(
        corpus, small_config(seed=6),
        nn_core.TrainConfig(learning_rate=0.05, epochs=5, seed=6))
    path = tmp_path / "classifier.json"
    save_params(path, params)
    loaded = load_params(path)
    for text, _ in corpus.examples:
        np.testing.assert_allclose(classify(text, loaded)[1],
                                   classify(text, params)[1], atol=1e-15)
