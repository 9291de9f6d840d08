"""Single-pass inference on unseen documents and topic-feature export."""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import IO

import numpy as np

from .corpus import Corpus
from .model import TrainedModel
from .trainer import assign_document, doc_topic_dist

logger = logging.getLogger(__name__)

# Number of token visits per inference stage; lets tests check the
# single-pass work bound.
work_counter: Counter = Counter()


@dataclass
class DocTopics:
    doc_id: int
    probs: np.ndarray
    assignments: np.ndarray | None = None
    warning: bool = False


def infer_topics(model: TrainedModel, tokens, doc_id: int = 0) -> DocTopics:
    """Document-topic distribution from one pass over the keyword scores.

    Empty documents (e.g. only out-of-vocabulary words) get the uniform
    distribution with ``warning`` set.
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    work_counter["score_sum"] += len(tokens)
    if len(tokens) == 0:
        logger.warning("document %s has no known tokens; using uniform topics", doc_id)
        return DocTopics(doc_id, np.full(model.n_topics, 1.0 / model.n_topics), warning=True)
    sums = model.f[tokens].sum(axis=0)
    return DocTopics(doc_id, doc_topic_dist(sums, model.hyperparams.alpha)[0])


def assign_unseen(model: TrainedModel, tokens, doc_topics: DocTopics) -> np.ndarray:
    """Topic id of every token, using the same windowed rule as training."""
    work_counter["assign"] += len(tokens)
    cols = assign_document(model.f, doc_topics.probs, tokens, model.hyperparams.L)
    return model.active_topics[cols]


def infer_corpus(model: TrainedModel, corpus: Corpus, with_assignments: bool = False) -> list[DocTopics]:
    out = []
    for d in corpus.documents:
        dt = infer_topics(model, d.tokens, d.doc_id)
        if with_assignments:
            dt.assignments = assign_unseen(model, d.tokens, dt)
        out.append(dt)
    return out


def export_features(model: TrainedModel, corpus: Corpus, destination: str | Path | IO[str]) -> np.ndarray:
    """Write one CSV row per document: ``doc_id,label,t<id>,...``.

    Returns the feature matrix (documents x active topics).
    """
    rows = infer_corpus(model, corpus)
    features = np.array([r.probs for r in rows]).reshape(len(rows), model.n_topics)
    header = ["doc_id", "label"] + [f"t{t}" for t in model.active_topics.tolist()]

    def write(fh):
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for d, r in zip(corpus.documents, rows):
            writer.writerow([d.doc_id, d.label or ""] + [format(x, ".17g") for x in r.probs])

    if hasattr(destination, "write"):
        write(destination)
    else:
        with open(destination, "w", encoding="utf-8", newline="") as fh:
            write(fh)
    return features


def read_features(path: str | Path):
    """Parse a feature CSV into ``(doc_ids, labels, topic_ids, matrix)``."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        topics = [int(h[1:]) for h in header[2:]]
        ids, labels, values = [], [], []
        for row in reader:
            ids.append(int(row[0]))
            labels.append(row[1])
            values.append([float(x) for x in row[2:]])
    return ids, labels, topics, np.array(values).reshape(len(ids), len(topics))
