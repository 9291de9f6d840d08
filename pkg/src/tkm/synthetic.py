"""Planted-topic corpora for benchmarking and acceptance checks.

Every topic owns a disjoint set of keywords with Zipf-distributed
frequencies.  A document belongs to one topic (its label) and mixes that
topic's keywords with words from a shared background vocabulary.
"""

from __future__ import annotations

import numpy as np


def _zipf(n: int, exponent: float) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** exponent
    return w / w.sum()


def planted_documents(
    n_docs: int = 2000,
    n_topics: int = 10,
    keywords_per_topic: int = 20,
    n_background: int = 200,
    doc_length: tuple[int, int] = (40, 100),
    keyword_rate: float = 0.8,
    zipf_exponent: float = 1.0,
    seed: int = 0,
) -> list[tuple[str, str]]:
    """Generate ``(label, text)`` pairs; labels are ``"topic<i>"``.

    Keyword ``j`` of topic ``i`` is spelled ``k<i>x<j>``, background word
    ``j`` is ``bg<j>``.
    """
    rng = np.random.default_rng(seed)
    kw_p = _zipf(keywords_per_topic, zipf_exponent)
    bg_p = _zipf(n_background, zipf_exponent)
    docs = []
    for d in range(n_docs):
        topic = d % n_topics
        n = int(rng.integers(doc_length[0], doc_length[1] + 1))
        is_kw = rng.random(n) < keyword_rate
        kw = rng.choice(keywords_per_topic, size=n, p=kw_p)
        bg = rng.choice(n_background, size=n, p=bg_p)
        words = [f"k{topic}x{a}" if flag else f"bg{b}" for flag, a, b in zip(is_kw, kw, bg)]
        docs.append((f"topic{topic}", " ".join(words)))
    order = rng.permutation(n_docs)
    return [docs[i] for i in order]
