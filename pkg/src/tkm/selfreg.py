"""Topic divergence and the distinct-topic filter used to prune redundant topics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BetaZero, DimensionMismatch


@dataclass(frozen=True)
class TopicWordDist:
    topic: int
    probs: np.ndarray


def smoothed_word_dists(counts: np.ndarray, beta: float) -> np.ndarray:
    """Column-wise ``(n(w,t) + beta) / (sum_w n(w,t) + beta*|W|)``."""
    counts = np.asarray(counts, dtype=np.float64)
    if beta <= 0:
        raise BetaZero("beta must be > 0 for divergence computations")
    return (counts + beta) / (counts.sum(axis=0) + beta * counts.shape[0])


def smoothed_word_dist(state, t: int, beta: float) -> TopicWordDist:
    col = state.column(t)
    return TopicWordDist(int(t), smoothed_word_dists(state.counts[:, [col]], beta)[:, 0])


def _skl(p, logp, q, logq) -> float:
    # KL(p,q) + KL(q,p) == sum (p - q)(ln p - ln q); every term is >= 0
    return float(np.dot(p - q, logp - logq))


def skl(p, q) -> float:
    """Symmetrized Kullback-Leibler divergence in nats."""
    p = p.probs if isinstance(p, TopicWordDist) else np.asarray(p, dtype=np.float64)
    q = q.probs if isinstance(q, TopicWordDist) else np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise DimensionMismatch(f"{p.shape} vs {q.shape}")
    return _skl(p, np.log(p), q, np.log(q))


def distinct_topics(state, gamma: float, beta: float) -> np.ndarray:
    """Greedy distinct-topic set.

    Topics are visited by descending total assignment mass (ties by id) and a
    topic is kept iff its SKL to every topic kept so far is at least
    ``gamma``.  The result is sorted by topic id and never empty.

    ``state`` may be a :class:`~tkm.model.ModelState` or a trained model; only
    ``counts`` and ``active_topics`` are read.
    """
    topics = np.asarray(state.active_topics)
    counts = np.asarray(state.counts)
    if len(topics) <= 1:
        return topics.copy()
    P = np.ascontiguousarray(smoothed_word_dists(counts, beta).T)
    logP = np.log(P)
    mass = counts.sum(axis=0)
    order = np.lexsort((topics, -mass))
    kept: list[int] = []
    for col in order:
        if all(_skl(P[col], logP[col], P[k], logP[k]) >= gamma for k in kept):
            kept.append(int(col))
    return np.sort(topics[kept])
