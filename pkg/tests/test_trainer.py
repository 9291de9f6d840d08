import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import random_corpus
from tkm.corpus import PreprocessOptions, build_corpus
from tkm.errors import EmptyCorpus, InvalidHyperparams
from tkm.model import Hyperparams, ModelState
from tkm.trainer import (
    ScoreSnapshot,
    SweepPlan,
    SweepResult,
    assign_corpus,
    assign_document,
    assign_token,
    converged,
    doc_topic_dist,
    init_state,
    sweep,
    train,
    update_doc_topics,
)

# two-word example: keyword a pulls its neighbour b into topic 0
F_AB = np.array([[0.9, 0.0], [0.1, 0.3]])


def test_keyword_pulls_neighbour():
    assert assign_token(F_AB, np.array([0.5, 0.5]), [0, 1], 1, 7) == 0
    assert oracles.brute_force_assign(F_AB.tolist(), [0.5, 0.5], [0, 1], 7) == [0, 0]
    assert assign_document(F_AB, np.array([0.5, 0.5]), [0, 1], 7).tolist() == [0, 0]


def test_without_window_b_keeps_own_topic():
    assert assign_token(F_AB, np.array([0.5, 0.5]), [0, 1], 1, 0) == 1


def test_single_topic_and_ties():
    f = np.array([[0.5], [0.5]])
    assert assign_document(f, np.array([1.0]), [0, 1, 1], 2).tolist() == [0, 0, 0]
    flat = np.full((2, 3), 0.2)
    assert assign_document(flat, np.full(3, 1 / 3), [0, 1], 1).tolist() == [0, 0]
    assert assign_token(flat, np.full(3, 1 / 3), [0, 1], 0, 1, topics=[4, 7, 9]) == 4


def test_assign_token_bounds():
    with pytest.raises(IndexError):
        assign_token(F_AB, np.array([0.5, 0.5]), [0, 1], 2, 1)


def test_init_state_is_seeded_and_normalized():
    c = build_corpus([(None, "a b c a b c")], PreprocessOptions(min_global_count=1))
    s1, s2 = init_state(c, Hyperparams(k=3, seed=4)), init_state(c, Hyperparams(k=3, seed=4))
    assert np.array_equal(s1.f, s2.f)
    assert np.allclose(s1.f.sum(axis=0), 1.0, atol=1e-12)
    assert not np.array_equal(s1.f, init_state(c, Hyperparams(k=3, seed=5)).f)
    assert np.all(s1.doc_topics == 1 / 3) and s1.active_topics.tolist() == [0, 1, 2]
    single = init_state(c, Hyperparams(k=1))
    assert single.f.sum() == pytest.approx(1.0, abs=1e-12)


def test_sweep_conserves_counts():
    c = build_corpus(
        [(None, "a b c d e"), (None, "a b c d e f g"), (None, "a b c d e f g a b")],
        PreprocessOptions(min_global_count=1),
    )
    s = init_state(c, Hyperparams(k=4))
    r = sweep(s, c, 2)
    assert r.new_counts.sum() == 21 == r.token_total
    assert r.changed_fraction == 1.0


def test_single_topic_counts_equal_global_counts():
    c = random_corpus(np.random.default_rng(1), 10, 15, 12)
    s = init_state(c, Hyperparams(k=1))
    r = sweep(s, c, 3)
    assert np.array_equal(r.new_counts[:, 0], c.vocabulary.global_count)


def test_repeated_sweep_reports_no_change():
    c = random_corpus(np.random.default_rng(2), 20, 15, 20)
    s = init_state(c, Hyperparams(k=4))
    sweep(s, c, 3)
    assert sweep(s, c, 3).changed_fraction == 0.0


def test_update_doc_topics_examples():
    assert doc_topic_dist(np.array([3.0, 1.0]), 1.0)[0].tolist() == pytest.approx([0.75, 0.25], abs=1e-15)
    assert doc_topic_dist(np.array([3.0, 1.0]), 2.0)[0].tolist() == pytest.approx([0.9, 0.1], abs=1e-15)
    for a in (0.5, 1.0, 7.0):
        assert np.allclose(doc_topic_dist(np.array([2.0, 2.0, 2.0]), a), 1 / 3, atol=1e-15)
    assert np.allclose(doc_topic_dist(np.zeros(4), 2.5), 0.25)


def test_update_doc_topics_on_state():
    c = build_corpus([(None, "a b"), (None, "b b")], PreprocessOptions(min_global_count=1))
    s = init_state(c, Hyperparams(k=2))
    s.f = np.array([[1.0, 0.0], [0.0, 1.0]])
    update_doc_topics(s, c, 1.0)
    assert s.doc_topics.tolist() == [[0.5, 0.5], [0.0, 1.0]]


def _cr(changed, index, topics=(0, 1), f_delta=1.0):
    prev = ScoreSnapshot(np.array(topics), np.zeros((2, len(topics))))
    cur = ModelState(
        active_topics=np.array(topics), counts=None, f=np.full((2, len(topics)), f_delta),
        con=None, H=None, doc_topics=None, global_count=None, sweep_index=index,
    )
    return prev, cur, SweepResult(None, changed, 0, None)


def test_converged_rules():
    hp = Hyperparams(max_sweeps=50)
    assert converged(*_cr(0.0, 3), hp) == (True, "assign_change")
    assert converged(*_cr(1.0, 1), hp) == (False, "")
    assert converged(*_cr(1.0, 50), hp) == (True, "max_sweeps")
    assert converged(*_cr(0.5, 4, f_delta=1e-6), hp) == (True, "score_change")
    assert converged(*_cr(0.5, 4), hp) == (False, "")


def test_converged_waits_after_pruning():
    hp = Hyperparams()
    prev = ScoreSnapshot(np.array([0, 1, 2]), np.zeros((2, 3)))
    _, cur, res = _cr(0.0, 5)
    assert converged(prev, cur, res, hp) == (False, "")


def test_train_validates_and_rejects_empty():
    c = random_corpus(np.random.default_rng(0), 5, 5, 5)
    with pytest.raises(InvalidHyperparams):
        train(c, Hyperparams(alpha=0))
    from tkm.corpus import Corpus

    with pytest.raises(EmptyCorpus):
        train(Corpus([], c.vocabulary))


def test_train_defaults_and_history(small_model):
    hp = small_model.hyperparams
    assert (hp.delta, hp.L) == (1.5, 7)
    h = small_model.history
    assert [r["sweep"] for r in h] == list(range(1, small_model.sweeps_run + 1))
    assert set(h[0]) == {"sweep", "active_topics", "changed_fraction", "max_delta_f", "elapsed_ms"}
    assert h[-1]["active_topics"] == small_model.n_topics
    assert small_model.convergence in {"assign_change", "score_change", "max_sweeps"}


def test_train_recovers_planted_topics(small_model):
    # three planted keyword sets on top of a shared background
    assert 2 <= small_model.n_topics <= 6


def test_beta_zero_disables_pruning(caplog):
    c = random_corpus(np.random.default_rng(3), 30, 10, 10)
    with caplog.at_level(logging.WARNING):
        m = train(c, Hyperparams(k=3, beta=0.0, max_sweeps=5))
    assert "pruning disabled" in caplog.text
    assert m.n_topics >= 1


def test_plan_independent_of_chunk_size():
    rng = np.random.default_rng(5)
    c = random_corpus(rng, 40, 20, 30)
    s = init_state(c, Hyperparams(k=4, seed=1))
    s.doc_topics = rng.dirichlet(np.ones(4), size=len(c))
    whole = assign_corpus(s, c, 3)
    for size in (1, 7, 50):
        assert np.array_equal(assign_corpus(s, c, 3, workers=3, plan=SweepPlan(c, 3, size)), whole)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 5))
def test_zero_window_is_unigram(seed, k):
    rng = np.random.default_rng(seed)
    W = int(rng.integers(1, 20))
    f = rng.random((W, k))
    p = rng.dirichlet(np.ones(k))
    tokens = rng.integers(0, W, size=int(rng.integers(1, 30)))
    expected = np.argmax(2 * f[tokens] * p, axis=1)
    assert np.array_equal(assign_document(f, p, tokens, 0), expected)
    assert [assign_token(f, p, tokens, i, 0) for i in range(len(tokens))] == expected.tolist()


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_sweep_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    c = random_corpus(rng, int(rng.integers(1, 15)), int(rng.integers(1, 12)), 15)
    k, L = int(rng.integers(1, 5)), int(rng.integers(0, 4))
    s = init_state(c, Hyperparams(k=k, seed=seed))
    s.f = np.round(rng.random(s.f.shape) * 4) / 4  # coarse values force ties
    s.doc_topics = rng.dirichlet(np.ones(k), size=len(c))
    r = sweep(s, c, L, workers=2, plan=SweepPlan(c, L, chunk_tokens=int(rng.integers(1, 40))))
    off = c.offsets
    for d, doc in enumerate(c.documents):
        want = oracles.brute_force_assign(s.f.tolist(), s.doc_topics[d].tolist(), doc.tokens.tolist(), L)
        assert r.assignments[off[d] : off[d + 1]].tolist() == want
