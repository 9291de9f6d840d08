"""Model state, keyword-score mathematics and model persistence.

All logarithms are natural logarithms.  Score matrices are dense
``(n_words, n_active_topics)`` arrays whose columns follow the ascending
order of ``active_topics``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .corpus import PreprocessOptions, Vocabulary, read_vocabulary, write_vocabulary
from .errors import (
    DegenerateTopic,
    DistributionInvalid,
    InvalidHyperparams,
    ModelFormatError,
    TopicInactive,
)

logger = logging.getLogger(__name__)

MODEL_MAGIC = "TKM 1"


@dataclass(frozen=True)
class Hyperparams:
    k: int = 100
    alpha: float = 2.5
    beta: float = 0.05
    delta: float = 1.5
    L: int = 7
    gamma: float = 0.25
    seed: int = 0
    max_sweeps: int = 200
    assign_change_tol: float = 1e-3
    score_change_tol: float = 1e-4

    def validate(self) -> "Hyperparams":
        checks = [
            (self.k >= 1, "k must be >= 1"),
            (self.alpha > 0, "alpha must be > 0"),
            (self.beta >= 0, "beta must be >= 0"),
            (self.delta >= 0, "delta must be >= 0"),
            (self.L >= 0, "L must be >= 0"),
            (self.gamma >= 0, "gamma must be >= 0"),
            (self.max_sweeps >= 1, "max_sweeps must be >= 1"),
            (self.assign_change_tol >= 0, "assign_change_tol must be >= 0"),
            (self.score_change_tol >= 0, "score_change_tol must be >= 0"),
        ]
        for ok, msg in checks:
            if not ok:
                raise InvalidHyperparams(msg)
        return self


@dataclass
class ModelState:
    """Mutable training state.

    ``counts``, ``f`` and ``doc_topics`` have one column per active topic.
    ``assignments`` holds the topic id of every corpus token from the last
    sweep, in corpus order.
    """

    active_topics: np.ndarray
    counts: np.ndarray
    f: np.ndarray
    con: np.ndarray
    H: np.ndarray
    doc_topics: np.ndarray
    global_count: np.ndarray
    sweep_index: int = 0
    assignments: np.ndarray | None = None

    @property
    def n_topics(self) -> int:
        return len(self.active_topics)

    def column(self, topic: int) -> int:
        pos = int(np.searchsorted(self.active_topics, topic))
        if pos >= len(self.active_topics) or self.active_topics[pos] != topic:
            raise TopicInactive(topic)
        return pos

    def keep_topics(self, topics) -> None:
        """Restrict the state to the given subset of active topic ids."""
        cols = [self.column(t) for t in sorted(int(t) for t in topics)]
        self.active_topics = self.active_topics[cols]
        self.counts = self.counts[:, cols]
        self.f = self.f[:, cols]
        self.doc_topics = self.doc_topics[:, cols]


# --- entropy and concentration ---------------------------------------------


def entropy(topic_dist) -> float:
    """Shannon entropy in nats, with ``0 * ln 0 = 0``."""
    p = np.asarray(topic_dist, dtype=np.float64)
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise DistributionInvalid(f"not a probability vector (sum={p.sum()!r})")
    nz = p[p > 0]
    return float(max(0.0, -np.sum(nz * np.log(nz))))


def word_entropy(counts: np.ndarray) -> np.ndarray:
    """Entropy of p(t|w) for every row of a word x topic count matrix.

    Rows without any assignment get entropy 0.
    """
    counts = np.asarray(counts, dtype=np.float64)
    totals = counts.sum(axis=1, keepdims=True)
    p = counts / np.where(totals > 0, totals, 1.0)
    logp = np.zeros_like(p)
    np.log(p, out=logp, where=p > 0)
    return np.maximum(-(p * logp).sum(axis=1), 0.0)


def concentration_scores(global_count, H, n_topics: int, delta: float) -> np.ndarray:
    global_count = np.asarray(global_count, dtype=np.float64)
    num = np.log(np.minimum(float(n_topics), global_count + 1.0))
    return (num / (1.0 + np.asarray(H, dtype=np.float64))) ** delta


def concentration(w: int, state: ModelState, delta: float) -> float:
    """Concentration of word ``w``: ``(ln min(|T|, n(w)+1) / (1 + H(w)))**delta``."""
    row = state.counts[w]
    H = word_entropy(row[None, :])[0] if row.sum() > 0 else float(state.H[w])
    return float(concentration_scores(state.global_count[w], H, state.n_topics, delta))


def _effective_con(con: np.ndarray) -> np.ndarray:
    # With a single topic every concentration is ln(1) = 0; a constant factor
    # cancels under per-topic normalization, so use 1 instead.
    if con.size and not np.any(con):
        return np.ones_like(con)
    return con


# --- keyword scores ----------------------------------------------------------


def keyword_scores(counts: np.ndarray, con: np.ndarray, beta: float):
    """Return ``(f, degenerate)`` where ``degenerate`` marks columns whose
    normalizer is zero (those columns are left at zero)."""
    raw = np.log1p(np.asarray(counts, dtype=np.float64) + beta) * _effective_con(con)[:, None]
    norm = raw.sum(axis=0)
    degenerate = norm <= 0
    f = raw / np.where(degenerate, 1.0, norm)
    return f, degenerate


def compute_keyword_scores(state: ModelState, beta: float) -> np.ndarray:
    f, degenerate = keyword_scores(state.counts, state.con, beta)
    if degenerate.any():
        raise DegenerateTopic(state.active_topics[degenerate].tolist())
    return f


def human_scores(counts: np.ndarray, con: np.ndarray):
    """Return ``(f_hu, flagged)``; flagged columns had a zero normalizer and
    were set to the uniform distribution."""
    raw = np.asarray(counts, dtype=np.float64) * _effective_con(con)[:, None]
    norm = raw.sum(axis=0)
    flagged = norm <= 0
    f_hu = raw / np.where(flagged, 1.0, norm)
    if flagged.any():
        f_hu[:, flagged] = 1.0 / raw.shape[0]
    return f_hu, flagged


def compute_human_scores(state: ModelState) -> np.ndarray:
    f_hu, flagged = human_scores(state.counts, state.con)
    if flagged.any():
        logger.warning("topics %s have no mass; f_hu set uniform", state.active_topics[flagged].tolist())
    return f_hu


# --- trained model -----------------------------------------------------------


@dataclass
class TrainedModel:
    vocabulary: Vocabulary
    hyperparams: Hyperparams
    active_topics: np.ndarray
    f: np.ndarray
    f_hu: np.ndarray
    con: np.ndarray
    counts: np.ndarray
    preprocess: PreprocessOptions = field(default_factory=PreprocessOptions)
    sweeps_run: int = 0
    convergence: str = ""
    # training-only extras, not persisted
    history: list = field(default_factory=list, repr=False)
    doc_topics: np.ndarray | None = field(default=None, repr=False)
    assignments: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_topics(self) -> int:
        return len(self.active_topics)

    def column(self, topic: int) -> int:
        pos = int(np.searchsorted(self.active_topics, topic))
        if pos >= len(self.active_topics) or self.active_topics[pos] != topic:
            raise TopicInactive(topic)
        return pos

    def topic_mass(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def subset(self, topics) -> "TrainedModel":
        """Copy of the model restricted to ``topics`` (training extras dropped)."""
        cols = [self.column(t) for t in sorted(int(t) for t in topics)]
        return TrainedModel(
            vocabulary=self.vocabulary,
            hyperparams=self.hyperparams,
            active_topics=self.active_topics[cols].copy(),
            f=self.f[:, cols].copy(),
            f_hu=self.f_hu[:, cols].copy(),
            con=self.con.copy(),
            counts=self.counts[:, cols].copy(),
            preprocess=self.preprocess,
            sweeps_run=self.sweeps_run,
            convergence=self.convergence,
        )


def top_words(model: TrainedModel, t: int, m: int = 10) -> list[tuple[str, float]]:
    """The ``m`` highest-ranked words of topic ``t`` by f_hu, ties by word id."""
    if m < 1:
        raise ValueError("m must be >= 1")
    scores = model.f_hu[:, model.column(t)]
    order = np.lexsort((np.arange(len(scores)), -scores))[:m]
    words = model.vocabulary.id_to_word
    return [(words[i], float(scores[i])) for i in order]


def top_word_ids(model: TrainedModel, t: int, m: int = 10) -> np.ndarray:
    scores = model.f_hu[:, model.column(t)]
    return np.lexsort((np.arange(len(scores)), -scores))[:m]


# --- persistence ---------------------------------------------------------------


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _preprocess_header(opts: PreprocessOptions) -> list[tuple[str, str]]:
    stop = " ".join(sorted(opts.stopwords)) if opts.stopwords else ""
    return [
        ("preprocess.lowercase", str(int(opts.lowercase))),
        ("preprocess.stem", str(int(opts.stem))),
        ("preprocess.min_global_count", str(opts.min_global_count)),
        ("preprocess.min_doc_tokens", str(opts.min_doc_tokens)),
        ("preprocess.token_pattern", opts.token_pattern),
        ("preprocess.stopwords", stop),
    ]


def save_model(model: TrainedModel, path: str | Path) -> None:
    """Write the versioned plain-text model file.

    Output depends only on the model contents, so equal models give
    byte-identical files.
    """
    hp = model.hyperparams
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(MODEL_MAGIC + "\n")
        for fld in fields(hp):
            fh.write(f"{fld.name}={getattr(hp, fld.name)!r}\n")
        for key, value in _preprocess_header(model.preprocess):
            fh.write(f"{key}={value}\n")
        fh.write(f"sweeps_run={model.sweeps_run}\n")
        fh.write(f"convergence={model.convergence}\n")
        fh.write("active_topics=" + " ".join(map(str, model.active_topics.tolist())) + "\n")
        write_vocabulary(fh, model.vocabulary)
        fh.write(f"con {len(model.con)}\n")
        for i, c in enumerate(model.con):
            fh.write(f"{i}\t{_fmt(c)}\n")
        for col, t in enumerate(model.active_topics.tolist()):
            f, fhu, n = model.f[:, col], model.f_hu[:, col], model.counts[:, col]
            rows = np.flatnonzero((f != 0) | (fhu != 0) | (n != 0))
            fh.write(f"topic {t} {len(rows)}\n")
            for w in rows.tolist():
                fh.write(f"{w}\t{_fmt(f[w])}\t{_fmt(fhu[w])}\t{int(n[w])}\n")


_INT_FIELDS = {"k", "L", "seed", "max_sweeps"}


def load_model(path: str | Path) -> TrainedModel:
    try:
        with open(path, encoding="utf-8") as fh:
            return _parse_model(iter(fh))
    except (ValueError, IndexError, StopIteration) as exc:
        if isinstance(exc, ModelFormatError):
            raise
        raise ModelFormatError(f"{path}: corrupt model file ({exc})") from exc


def _parse_model(lines) -> TrainedModel:
    if next(lines, "").rstrip("\n") != MODEL_MAGIC:
        raise ModelFormatError(f"not a {MODEL_MAGIC!r} model file")
    header: dict[str, str] = {}
    pending = None
    for line in lines:
        line = line.rstrip("\n")
        if line.startswith("vocabulary "):
            pending = line
            break
        key, sep, value = line.partition("=")
        if not sep:
            raise ModelFormatError(f"bad header line {line!r}")
        header[key] = value

    hp_kwargs = {}
    for fld in fields(Hyperparams):
        if fld.name not in header:
            raise ModelFormatError(f"missing hyperparameter {fld.name}")
        raw = header[fld.name]
        hp_kwargs[fld.name] = int(raw) if fld.name in _INT_FIELDS else float(raw)
    hp = Hyperparams(**hp_kwargs)

    stop = header.get("preprocess.stopwords", "")
    preprocess = PreprocessOptions(
        lowercase=header.get("preprocess.lowercase", "1") == "1",
        stopwords=frozenset(stop.split()) if stop else None,
        stem=header.get("preprocess.stem", "0") == "1",
        min_global_count=int(header.get("preprocess.min_global_count", "2")),
        min_doc_tokens=int(header.get("preprocess.min_doc_tokens", "1")),
        token_pattern=header.get("preprocess.token_pattern", PreprocessOptions.token_pattern),
    )
    active = np.array([int(x) for x in header.get("active_topics", "").split()], dtype=np.int64)

    if pending is None:
        raise ModelFormatError("missing vocabulary block")
    vocab = read_vocabulary(lines, header=pending)
    W, T = len(vocab), len(active)

    head = next(lines).split()
    if head[0] != "con" or int(head[1]) != W:
        raise ModelFormatError("missing or mismatched con block")
    con = np.zeros(W)
    for _ in range(W):
        i, c = next(lines).rstrip("\n").split("\t")
        con[int(i)] = float(c)

    f = np.zeros((W, T))
    f_hu = np.zeros((W, T))
    counts = np.zeros((W, T), dtype=np.int64)
    for col in range(T):
        head = next(lines).split()
        if head[0] != "topic" or int(head[1]) != active[col]:
            raise ModelFormatError(f"expected block for topic {active[col]}")
        for _ in range(int(head[2])):
            w, fv, hv, n = next(lines).rstrip("\n").split("\t")
            w = int(w)
            f[w, col], f_hu[w, col], counts[w, col] = float(fv), float(hv), int(n)
    if next(lines, "").strip():
        raise ModelFormatError("trailing data after last topic block")

    return TrainedModel(
        vocabulary=vocab,
        hyperparams=hp,
        active_topics=active,
        f=f,
        f_hu=f_hu,
        con=con,
        counts=counts,
        preprocess=preprocess,
        sweeps_run=int(header.get("sweeps_run", "0")),
        convergence=header.get("convergence", ""),
    )


def is_normalized(matrix: np.ndarray, tol: float = 1e-9) -> bool:
    return bool(np.all(np.abs(matrix.sum(axis=0) - 1.0) <= tol))


__all__ = [
    "Hyperparams",
    "ModelState",
    "TrainedModel",
    "entropy",
    "word_entropy",
    "concentration",
    "concentration_scores",
    "compute_keyword_scores",
    "compute_human_scores",
    "keyword_scores",
    "human_scores",
    "top_words",
    "save_model",
    "load_model",
]
