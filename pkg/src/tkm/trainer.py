"""Iterative training: windowed token assignment, score updates, pruning.

Each iteration assigns every token to its best topic given the current
keyword scores and document-topic distributions, rebuilds the assignment
counts, recomputes concentration and keyword scores, drops redundant topics
and finally recomputes the document-topic distributions.

The assignment of a token at position ``i`` maximizes, over active topics
``t`` and window positions ``j`` in ``[i-L, i+L]`` (clipped to the
document), ``(f(w_i,t) + f(w_j,t)) * p(t|d)``.  Since the inner maximum over
``j`` only involves ``f(w_j,t)``, it is computed once per topic with a
running window maximum, which keeps the cost of a sweep independent of
``L``.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.ndimage import maximum_filter1d

from .corpus import Corpus, PreprocessOptions
from .errors import EmptyCorpus
from .model import (
    Hyperparams,
    ModelState,
    TrainedModel,
    concentration_scores,
    human_scores,
    keyword_scores,
    word_entropy,
)
from .selfreg import distinct_topics

logger = logging.getLogger(__name__)

CHUNK_TOKENS = 1 << 15


@dataclass
class SweepResult:
    new_counts: np.ndarray
    changed_fraction: float
    token_total: int
    assignments: np.ndarray


class _Chunk(NamedTuple):
    start: int  # first token, in corpus flat order
    stop: int
    padded: np.ndarray  # word ids, documents separated by L sentinel ids
    real: np.ndarray  # positions of real tokens inside ``padded``
    doc_rows: np.ndarray  # document row of every real token


class SweepPlan:
    """Fixed partition of a corpus into contiguous document shards.

    The partition depends only on the corpus and ``L``, never on the number
    of workers, and every token's result is computed independently of its
    shard, so sweeps are bit-identical for any worker count.
    """

    def __init__(self, corpus: Corpus, L: int, chunk_tokens: int = CHUNK_TOKENS):
        self.L = L
        self.n_words = len(corpus.vocabulary)
        offsets = corpus.offsets
        tokens = corpus.flat_tokens
        self.chunks: list[_Chunk] = []
        d0 = 0
        n_docs = len(corpus)
        while d0 < n_docs:
            d1 = int(np.searchsorted(offsets, offsets[d0] + chunk_tokens, side="right")) - 1
            d1 = min(max(d1, d0 + 1), n_docs)
            self.chunks.append(self._make_chunk(tokens, offsets, d0, d1))
            d0 = d1

    def _make_chunk(self, tokens, offsets, d0, d1) -> _Chunk:
        start, stop = int(offsets[d0]), int(offsets[d1])
        lengths = np.diff(offsets[d0 : d1 + 1])
        local_doc = np.repeat(np.arange(d1 - d0), lengths)
        real = np.arange(stop - start) + self.L * local_doc
        padded = np.full(stop - start + self.L * (d1 - d0 - 1), self.n_words, dtype=np.int64)
        padded[real] = tokens[start:stop]
        return _Chunk(start, stop, padded, real, local_doc + d0)


def _window_argmax(fxT: np.ndarray, pT: np.ndarray, padded, real, L: int) -> np.ndarray:
    """Column index of the best topic for every real position of a chunk.

    ``fxT`` is the transposed score matrix with an extra ``-inf`` column for
    the separator id; ``pT`` holds p(t|d) per real token as columns.
    """
    G = fxT[:, padded]
    M = maximum_filter1d(G, 2 * L + 1, axis=1, mode="constant", cval=-np.inf) if L else G
    scores = (G[:, real] + M[:, real]) * pT
    # argmax returns the first maximum, i.e. the smallest topic id on ties
    return scores.argmax(axis=0)


def _extended_scores_T(f: np.ndarray) -> np.ndarray:
    fxT = np.empty((f.shape[1], f.shape[0] + 1))
    fxT[:, :-1] = f.T
    fxT[:, -1] = -np.inf
    return fxT


def assign_document(f: np.ndarray, p: np.ndarray, tokens, L: int) -> np.ndarray:
    """Best column index for every position of one document."""
    tokens = np.asarray(tokens, dtype=np.int64)
    if len(tokens) == 0:
        return np.zeros(0, dtype=np.int64)
    fxT = _extended_scores_T(f)
    pT = np.repeat(np.asarray(p, dtype=np.float64)[:, None], len(tokens), axis=1)
    return _window_argmax(fxT, pT, tokens, np.arange(len(tokens)), L)


def assign_token(f: np.ndarray, p: np.ndarray, tokens, i: int, L: int, topics=None) -> int:
    """Topic of the token at position ``i`` of a document.

    Returns the column index into ``f``, or the topic id when ``topics`` (the
    active topic ids) is given.
    """
    n = len(tokens)
    if not 0 <= i < n:
        raise IndexError(i)
    lo, hi = max(0, i - L), min(n - 1, i + L)
    window = np.asarray(tokens[lo : hi + 1], dtype=np.int64)
    scores = (f[tokens[i]] + f[window].max(axis=0)) * p
    col = int(np.argmax(scores))
    return col if topics is None else int(topics[col])


def init_state(corpus: Corpus, hp: Hyperparams) -> ModelState:
    """Initial state: all ``k`` topics active, uniform p(t|d), and keyword
    scores that are uniform plus a small seeded perturbation."""
    if len(corpus) == 0 or corpus.total_tokens == 0:
        raise EmptyCorpus("cannot train on an empty corpus")
    W, k = len(corpus.vocabulary), hp.k
    rng = np.random.default_rng(hp.seed)
    f = 1.0 / W + rng.uniform(0.0, 0.1 / W, size=(W, k))
    f /= f.sum(axis=0)
    return ModelState(
        active_topics=np.arange(k, dtype=np.int64),
        counts=np.zeros((W, k), dtype=np.int64),
        f=f,
        con=np.ones(W),
        H=np.zeros(W),
        doc_topics=np.full((len(corpus), k), 1.0 / k),
        global_count=corpus.vocabulary.global_count.copy(),
    )


def assign_corpus(
    state: ModelState, corpus: Corpus, L: int, workers: int = 1, plan: SweepPlan | None = None
) -> np.ndarray:
    """Column index of every corpus token under the current state."""
    plan = plan if plan is not None and plan.L == L else SweepPlan(corpus, L)
    fxT = _extended_scores_T(state.f)
    docT = np.ascontiguousarray(state.doc_topics.T)

    def run(chunk: _Chunk) -> np.ndarray:
        return _window_argmax(fxT, docT[:, chunk.doc_rows], chunk.padded, chunk.real, L)

    if workers > 1 and len(plan.chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, plan.chunks))
    else:
        parts = [run(c) for c in plan.chunks]
    if not parts:
        return np.zeros(0, dtype=np.int64)
    return np.concatenate(parts)


def sweep(
    state: ModelState, corpus: Corpus, L: int = 7, workers: int = 1, plan: SweepPlan | None = None
) -> SweepResult:
    """Reassign every token and rebuild the assignment counts in ``state``."""
    cols = assign_corpus(state, corpus, L, workers, plan)
    W, T = len(corpus.vocabulary), state.n_topics
    flat = corpus.flat_tokens.astype(np.int64)
    counts = np.bincount(flat * T + cols, minlength=W * T).reshape(W, T)
    assignments = state.active_topics[cols]
    if state.assignments is None:
        changed = 1.0
    else:
        changed = float(np.count_nonzero(assignments != state.assignments)) / max(len(cols), 1)
    state.counts = counts
    state.assignments = assignments
    return SweepResult(counts, changed, int(counts.sum()), assignments)


def doc_topic_dist(sums: np.ndarray, alpha: float) -> np.ndarray:
    """Rows ``S(t)**alpha / sum_t S(t)**alpha``; all-zero rows become uniform."""
    S = np.atleast_2d(np.asarray(sums, dtype=np.float64))
    top = S.max(axis=1, keepdims=True)
    empty = top[:, 0] <= 0
    R = (S / np.where(empty[:, None], 1.0, top)) ** alpha
    R[empty] = 1.0
    R /= R.sum(axis=1, keepdims=True)
    return R


def update_doc_topics(state: ModelState, corpus: Corpus, alpha: float) -> None:
    sums = corpus.doc_term_matrix @ state.f
    state.doc_topics = doc_topic_dist(sums, alpha)


def max_score_change(prev, cur) -> float:
    """Largest ``|f_new - f_old|`` over the topics active in both states."""
    common, pi, ci = np.intersect1d(prev.active_topics, cur.active_topics, return_indices=True)
    if len(common) == 0:
        return float("inf")
    return float(np.max(np.abs(prev.f[:, pi] - cur.f[:, ci])))


class ScoreSnapshot(NamedTuple):
    active_topics: np.ndarray
    f: np.ndarray


def converged(prev, cur: ModelState, sweep_result: SweepResult, hp: Hyperparams) -> tuple[bool, str]:
    """Stopping test after a completed iteration.

    The assignment-change and score-change tests are not applied on the
    first sweep or on an iteration that pruned topics, since the state is
    then not settled yet.
    """
    if cur.sweep_index >= hp.max_sweeps:
        return True, "max_sweeps"
    if cur.sweep_index <= 1 or len(cur.active_topics) != len(prev.active_topics):
        return False, ""
    if sweep_result.changed_fraction < hp.assign_change_tol:
        return True, "assign_change"
    if max_score_change(prev, cur) < hp.score_change_tol:
        return True, "score_change"
    return False, ""


def _update_scores(state: ModelState, hp: Hyperparams) -> None:
    state.H = word_entropy(state.counts)
    state.con = concentration_scores(state.global_count, state.H, state.n_topics, hp.delta)
    f, degenerate = keyword_scores(state.counts, state.con, hp.beta)
    state.f = f
    if degenerate.any():
        logger.info("pruning degenerate topics %s", state.active_topics[degenerate].tolist())
        state.keep_topics(state.active_topics[~degenerate])


def train(
    corpus: Corpus,
    hp: Hyperparams | None = None,
    workers: int = 1,
    preprocess: PreprocessOptions | None = None,
    on_sweep: Callable[[dict], None] | None = None,
    inspect: Callable[[ModelState, SweepResult], None] | None = None,
) -> TrainedModel:
    """Fit a model.  ``on_sweep`` receives each diagnostics row; ``inspect``
    sees the full state and sweep result after every iteration's updates."""
    hp = (hp or Hyperparams()).validate()
    state = init_state(corpus, hp)
    plan = SweepPlan(corpus, hp.L)
    history: list[dict] = []
    prev = ScoreSnapshot(state.active_topics.copy(), state.f.copy())
    if hp.beta <= 0:
        logger.warning("beta=0: topic pruning disabled (divergences need smoothing)")

    while True:
        t0 = time.perf_counter()
        result = sweep(state, corpus, hp.L, workers, plan)
        state.sweep_index += 1
        _update_scores(state, hp)
        if hp.beta > 0:
            keep = distinct_topics(state, hp.gamma, hp.beta)
            if len(keep) < state.n_topics:
                state.keep_topics(keep)
        update_doc_topics(state, corpus, hp.alpha)
        if inspect is not None:
            inspect(state, result)

        done, reason = converged(prev, state, result, hp)
        row = {
            "sweep": state.sweep_index,
            "active_topics": state.n_topics,
            "changed_fraction": result.changed_fraction,
            "max_delta_f": max_score_change(prev, state),
            "elapsed_ms": (time.perf_counter() - t0) * 1000.0,
        }
        history.append(row)
        logger.debug("sweep %(sweep)d: |T|=%(active_topics)d changed=%(changed_fraction).4f", row)
        if on_sweep is not None:
            on_sweep(row)
        if done:
            break
        prev = ScoreSnapshot(state.active_topics.copy(), state.f.copy())

    f_hu, flagged = human_scores(state.counts, state.con)
    if flagged.any():
        logger.warning("topics %s ended without mass", state.active_topics[flagged].tolist())
    final = state.active_topics[assign_corpus(state, corpus, hp.L, workers, plan)]
    return TrainedModel(
        vocabulary=corpus.vocabulary,
        hyperparams=hp,
        active_topics=state.active_topics.copy(),
        f=state.f,
        f_hu=f_hu,
        con=state.con,
        counts=state.counts,
        preprocess=preprocess or PreprocessOptions(),
        sweeps_run=state.sweep_index,
        convergence=reason,
        history=history,
        doc_topics=state.doc_topics,
        assignments=final,
    )
