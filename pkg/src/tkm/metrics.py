"""Evaluation metrics: PMI topic coherence, topic-change probability and
cosine matching of topics between two models."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, Sequence

import numpy as np

from .corpus import Corpus
from .errors import DimensionMismatch, EmptyReference, ModelFormatError, UnseenWord
from .infer import assign_unseen, infer_topics
from .model import TrainedModel, top_word_ids

logger = logging.getLogger(__name__)

COOC_MAGIC = "TKMCOOC 1"


@dataclass
class CooccurrenceIndex:
    """Document and pair-document frequencies over a fixed word set.

    ``counts[i, j]`` is the number of reference documents containing both
    ``words[i]`` and ``words[j]``; the diagonal holds document frequencies.
    """

    words: list[str]
    num_docs: int = 0
    counts: np.ndarray = field(default=None)

    def __post_init__(self):
        self.position = {w: i for i, w in enumerate(self.words)}
        if self.counts is None:
            self.counts = np.zeros((len(self.words), len(self.words)), dtype=np.int64)

    def add_document(self, tokens: Iterable[str]) -> None:
        present = sorted({self.position[w] for w in tokens if w in self.position})
        if present:
            idx = np.array(present)
            self.counts[np.ix_(idx, idx)] += 1
        self.num_docs += 1

    def merge(self, other: "CooccurrenceIndex") -> "CooccurrenceIndex":
        if self.words != other.words:
            raise DimensionMismatch("indexes cover different word sets")
        return CooccurrenceIndex(list(self.words), self.num_docs + other.num_docs, self.counts + other.counts)

    def df(self, word: str) -> int:
        i = self.position.get(word)
        return 0 if i is None else int(self.counts[i, i])

    def pair_df(self, a: str, b: str) -> int:
        i, j = self.position.get(a), self.position.get(b)
        if i is None or j is None:
            return 0
        return int(self.counts[i, j])

    def check(self) -> None:
        df = np.diag(self.counts)
        bound = np.minimum(df[:, None], df[None, :])
        if not (np.array_equal(self.counts, self.counts.T) and np.all(self.counts <= bound)):
            raise AssertionError("pair frequencies exceed document frequencies")
        if np.any(df > self.num_docs):
            raise AssertionError("document frequency exceeds document count")

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(f"{COOC_MAGIC}\nnumdocs {self.num_docs}\n")
            for i, w in enumerate(self.words):
                fh.write(f"df {w} {int(self.counts[i, i])}\n")
            n = len(self.words)
            for i in range(n):
                for j in range(i + 1, n):
                    if self.counts[i, j]:
                        fh.write(f"pdf {self.words[i]} {self.words[j]} {int(self.counts[i, j])}\n")

    @classmethod
    def load(cls, path: str | Path) -> "CooccurrenceIndex":
        with open(path, encoding="utf-8") as fh:
            if fh.readline().rstrip("\n") != COOC_MAGIC:
                raise ModelFormatError(f"{path}: not a {COOC_MAGIC!r} file")
            kind, n = fh.readline().split()
            if kind != "numdocs":
                raise ModelFormatError(f"{path}: missing numdocs line")
            df_lines, pdf_lines = [], []
            for line in fh:
                parts = line.split()
                if parts and parts[0] == "df":
                    df_lines.append((parts[1], int(parts[2])))
                elif parts and parts[0] == "pdf":
                    pdf_lines.append((parts[1], parts[2], int(parts[3])))
                elif parts:
                    raise ModelFormatError(f"{path}: bad line {line!r}")
        index = cls([w for w, _ in df_lines], int(n))
        for i, (_, c) in enumerate(df_lines):
            index.counts[i, i] = c
        for a, b, c in pdf_lines:
            i, j = index.position[a], index.position[b]
            index.counts[i, j] = index.counts[j, i] = c
        return index


def build_cooc_index(reference_stream: Iterable[Sequence[str]], words: Iterable[str]) -> CooccurrenceIndex:
    """Count document and pair-document frequencies of ``words`` in one pass
    over a stream of tokenized reference documents."""
    words = sorted(set(words))
    if not words:
        raise ValueError("word set is empty")
    index = CooccurrenceIndex(words)
    for tokens in reference_stream:
        index.add_document(tokens)
    if index.num_docs == 0:
        raise EmptyReference("reference corpus has no documents")
    index.check()
    return index


def pmi_pair(index: CooccurrenceIndex, a: str, b: str) -> float:
    """Document-level PMI; a zero pair count is floored at one document."""
    da, db = index.df(a), index.df(b)
    if da == 0 or db == 0:
        raise UnseenWord(a if da == 0 else b)
    n = index.num_docs
    joint = max(index.pair_df(a, b), 1) / n
    return float(np.log(joint / ((da / n) * (db / n))))


@dataclass
class PMIReport:
    score: float
    per_topic: dict[int, float]
    flagged: list[int]


def topic_pmi(index: CooccurrenceIndex, words: Sequence[str]) -> float | None:
    """Median PMI over all pairs of ``words``; None if no pair is scorable."""
    values = []
    for i in range(len(words)):
        for j in range(i + 1, len(words)):
            try:
                values.append(pmi_pair(index, words[i], words[j]))
            except UnseenWord:
                continue
    return float(np.median(values)) if values else None


def model_top_words(model: TrainedModel, n: int = 10) -> dict[int, list[str]]:
    vocab = model.vocabulary.id_to_word
    return {int(t): [vocab[i] for i in top_word_ids(model, t, n)] for t in model.active_topics}


def model_pmi(model: TrainedModel, index: CooccurrenceIndex, top_n: int = 10) -> PMIReport:
    per_topic, flagged = {}, []
    for t, words in model_top_words(model, top_n).items():
        value = topic_pmi(index, words)
        if value is None:
            flagged.append(t)
            value = 0.0
        per_topic[t] = value
    if flagged:
        logger.warning("no scorable word pairs for topics %s", flagged)
    return PMIReport(float(np.mean(list(per_topic.values()))), per_topic, flagged)


def topic_change_probability(assignments: Iterable[np.ndarray]) -> float:
    """Topic changes between consecutive tokens divided by the total token count."""
    changes = tokens = 0
    for a in assignments:
        a = np.asarray(a)
        tokens += len(a)
        changes += int(np.count_nonzero(a[1:] != a[:-1]))
    return changes / tokens if tokens else 0.0


def split_by_document(flat: np.ndarray, corpus: Corpus) -> list[np.ndarray]:
    off = corpus.offsets
    return [flat[off[i] : off[i + 1]] for i in range(len(corpus))]


def toc(model: TrainedModel, corpus: Corpus, assignments: np.ndarray | None = None) -> float:
    """Topic-change probability of ``corpus``.

    Uses the given flat per-token assignments, otherwise re-assigns every
    document with the model.
    """
    if assignments is not None:
        return topic_change_probability(split_by_document(assignments, corpus))
    per_doc = []
    for d in corpus.documents:
        per_doc.append(assign_unseen(model, d.tokens, infer_topics(model, d.tokens, d.doc_id)))
    return topic_change_probability(per_doc)


def match_topics(a: np.ndarray, b: np.ndarray) -> list[tuple[int, int, float]]:
    """Greedy one-to-one matching of the columns of two word x topic score
    matrices by cosine similarity, most similar pair first.

    Returns ``(column_in_a, column_in_b, similarity)`` triples.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"{a.shape} vs {b.shape}")
    na = np.linalg.norm(a, axis=0)
    nb = np.linalg.norm(b, axis=0)
    sim = (a.T @ b) / np.outer(np.where(na > 0, na, 1.0), np.where(nb > 0, nb, 1.0))
    pairs = []
    free = np.ones_like(sim, dtype=bool)
    for _ in range(min(sim.shape)):
        masked = np.where(free, sim, -np.inf)
        i, j = np.unravel_index(np.argmax(masked), masked.shape)
        pairs.append((int(i), int(j), float(sim[i, j])))
        free[i, :] = False
        free[:, j] = False
    return pairs


def write_report(rows: Iterable[tuple[str, object, float]], destination: str | Path | IO[str]) -> None:
    """CSV report with header ``metric,topic,value``; model-level rows leave
    ``topic`` empty."""

    def write(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["metric", "topic", "value"])
        for metric, topic, value in rows:
            writer.writerow([metric, "" if topic is None else topic, format(float(value), ".17g")])

    if hasattr(destination, "write"):
        write(destination)
    else:
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            write(fh)
