"""Text ingestion: tokenization, vocabulary construction and corpus encoding.

Raw corpora are UTF-8 text with one document per line, optionally in the
labelled form ``label<TAB>text``.  An encoded corpus can be cached to disk
in a small versioned text format (see :func:`save_corpus`).
"""

from __future__ import annotations

import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import EmptyCorpus, ModelFormatError

logger = logging.getLogger(__name__)

DEFAULT_TOKEN_PATTERN = r"[^\W_]+"
CORPUS_MAGIC = "TKMCORPUS 1"


def load_stopwords(source: str | Path) -> frozenset[str]:
    """Read a stopword list, one word per line.

    The literal name ``"english"`` selects the bundled English list.
    """
    if str(source) == "english":
        text = resources.files("tkm").joinpath("data/stopwords_en.txt").read_text("utf-8")
    else:
        text = Path(source).read_text(encoding="utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def english_stemmer() -> Callable[[str], str]:
    import snowballstemmer

    stemmer = snowballstemmer.stemmer("english")
    return stemmer.stemWord


@dataclass(frozen=True)
class PreprocessOptions:
    """Settings of the preprocessing pipeline.

    ``stemmer`` is only consulted when ``stem`` is set; it defaults to the
    Snowball English stemmer.
    """

    lowercase: bool = True
    stopwords: frozenset[str] | None = None
    stem: bool = False
    min_global_count: int = 2
    min_doc_tokens: int = 1
    token_pattern: str = DEFAULT_TOKEN_PATTERN
    stemmer: Callable[[str], str] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.min_global_count < 1:
            raise ValueError("min_global_count must be >= 1")
        if self.min_doc_tokens < 1:
            raise ValueError("min_doc_tokens must be >= 1")

    @cached_property
    def _regex(self) -> re.Pattern:
        return re.compile(self.token_pattern)

    @cached_property
    def _stem(self) -> Callable[[str], str] | None:
        if not self.stem:
            return None
        return self.stemmer or english_stemmer()


def tokenize_and_preprocess(text: str, opts: PreprocessOptions) -> list[str]:
    """Split ``text`` into word strings and apply lowercasing, stopword
    removal and stemming, in that order.  Frequency filtering is a corpus
    level concern and is not applied here."""
    if opts.lowercase:
        text = text.lower()
    tokens = opts._regex.findall(text)
    if opts.stopwords:
        tokens = [w for w in tokens if w not in opts.stopwords]
    stem = opts._stem
    if stem is not None:
        tokens = [stem(w) for w in tokens]
    return tokens


@dataclass
class Vocabulary:
    id_to_word: list[str]
    global_count: np.ndarray
    word_to_id: dict[str, int] = field(init=False)

    def __post_init__(self):
        self.global_count = np.asarray(self.global_count, dtype=np.int64)
        self.word_to_id = {w: i for i, w in enumerate(self.id_to_word)}
        if len(self.word_to_id) != len(self.id_to_word):
            raise ValueError("duplicate words in vocabulary")
        if self.global_count.shape != (len(self.id_to_word),):
            raise ValueError("global_count length does not match vocabulary size")

    def __len__(self) -> int:
        return len(self.id_to_word)

    def __contains__(self, word: str) -> bool:
        return word in self.word_to_id

    def __eq__(self, other) -> bool:
        if not isinstance(other, Vocabulary):
            return NotImplemented
        return self.id_to_word == other.id_to_word and np.array_equal(
            self.global_count, other.global_count
        )


@dataclass(frozen=True, eq=False)
class Document:
    doc_id: int
    tokens: np.ndarray
    label: str | None = None

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True, eq=False)
class Corpus:
    documents: list[Document]
    vocabulary: Vocabulary

    def __len__(self) -> int:
        return len(self.documents)

    @cached_property
    def offsets(self) -> np.ndarray:
        """Start offset of every document in :attr:`flat_tokens`, plus the end."""
        lengths = np.fromiter((len(d) for d in self.documents), dtype=np.int64, count=len(self))
        return np.concatenate(([0], np.cumsum(lengths)))

    @cached_property
    def flat_tokens(self) -> np.ndarray:
        if not self.documents:
            return np.zeros(0, dtype=np.int32)
        return np.concatenate([d.tokens for d in self.documents]).astype(np.int32)

    @property
    def total_tokens(self) -> int:
        return int(self.offsets[-1])

    @property
    def labels(self) -> list[str | None]:
        return [d.label for d in self.documents]

    @cached_property
    def doc_term_matrix(self) -> sp.csr_matrix:
        """Sparse document x word count matrix."""
        rows = np.repeat(np.arange(len(self)), np.diff(self.offsets))
        data = np.ones(self.total_tokens, dtype=np.float64)
        m = sp.csr_matrix(
            (data, (rows, self.flat_tokens)), shape=(len(self), len(self.vocabulary))
        )
        m.sum_duplicates()
        return m


def _readonly(ids: Sequence[int]) -> np.ndarray:
    arr = np.asarray(ids, dtype=np.int32)
    arr.flags.writeable = False
    return arr


def build_corpus(
    doc_stream: Iterable[tuple[str | None, str]], opts: PreprocessOptions | None = None
) -> Corpus:
    """Tokenize every document, drop rare words and short documents, and
    encode the remainder.

    Word ids follow first-occurrence order over the surviving documents, so
    identical input streams always yield identical encodings.  Documents keep
    the index they had in the input stream as their ``doc_id``.
    """
    opts = opts or PreprocessOptions()
    raw = [
        (i, label, tokenize_and_preprocess(text, opts))
        for i, (label, text) in enumerate(doc_stream)
    ]
    if not raw:
        raise EmptyCorpus("document stream is empty")

    # Dropping short documents lowers counts, which can push more words under
    # the threshold; iterate until stable.
    keep_docs = raw
    while True:
        counts = Counter(w for _, _, toks in keep_docs for w in toks)
        rare = {w for w, c in counts.items() if c < opts.min_global_count}
        filtered = [(i, lab, [w for w in toks if w not in rare]) for i, lab, toks in keep_docs]
        survivors = [d for d in filtered if len(d[2]) >= opts.min_doc_tokens]
        stable = len(survivors) == len(filtered) or opts.min_doc_tokens == 1
        keep_docs = survivors
        if stable:
            break

    dropped = len(raw) - len(keep_docs)
    if dropped:
        logger.warning("dropped %d of %d documents left too short by preprocessing", dropped, len(raw))
    if not keep_docs:
        raise EmptyCorpus("no documents survived preprocessing")

    word_to_id: dict[str, int] = {}
    documents = []
    for i, label, toks in keep_docs:
        ids = [word_to_id.setdefault(w, len(word_to_id)) for w in toks]
        documents.append(Document(i, _readonly(ids), label))
    words = list(word_to_id)
    total = Counter(w for _, _, toks in keep_docs for w in toks)
    vocab = Vocabulary(words, np.array([total[w] for w in words], dtype=np.int64))
    return Corpus(documents, vocab)


def encode_document(text: str, vocab: Vocabulary, opts: PreprocessOptions) -> np.ndarray:
    """Encode unseen text with a fixed vocabulary; unknown words are dropped."""
    lookup = vocab.word_to_id
    ids = [lookup[w] for w in tokenize_and_preprocess(text, opts) if w in lookup]
    return np.asarray(ids, dtype=np.int32)


def encode_corpus(
    doc_stream: Iterable[tuple[str | None, str]],
    vocab: Vocabulary,
    opts: PreprocessOptions,
    keep_empty: bool = False,
) -> Corpus:
    """Encode a labelled document stream against an existing vocabulary."""
    documents = []
    for i, (label, text) in enumerate(doc_stream):
        ids = encode_document(text, vocab, opts)
        if len(ids) or keep_empty:
            documents.append(Document(i, _readonly(ids), label))
    return Corpus(documents, vocab)


def read_documents(path: str | Path, labeled: bool = False) -> Iterator[tuple[str | None, str]]:
    """Yield ``(label, text)`` pairs from a one-document-per-line file."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n").rstrip("\r")
            if labeled:
                label, sep, text = line.partition("\t")
                if not sep:
                    label, text = "", label
                yield label or None, text
            else:
                yield None, line


# --- encoded corpus cache ---------------------------------------------------


def write_vocabulary(fh, vocab: Vocabulary) -> None:
    fh.write(f"vocabulary {len(vocab)}\n")
    for i, (w, c) in enumerate(zip(vocab.id_to_word, vocab.global_count)):
        fh.write(f"{i}\t{w}\t{int(c)}\n")


def read_vocabulary(lines: Iterator[str], header: str | None = None) -> Vocabulary:
    head = (header if header is not None else next(lines, "")).split()
    if len(head) != 2 or head[0] != "vocabulary":
        raise ModelFormatError(f"expected vocabulary block, got {' '.join(head)!r}")
    words, counts = [], []
    for expected in range(int(head[1])):
        parts = next(lines, "").rstrip("\n").split("\t")
        if len(parts) != 3 or int(parts[0]) != expected:
            raise ModelFormatError(f"bad vocabulary line for id {expected}")
        words.append(parts[1])
        counts.append(int(parts[2]))
    return Vocabulary(words, np.array(counts, dtype=np.int64))


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CORPUS_MAGIC + "\n")
        write_vocabulary(fh, corpus.vocabulary)
        fh.write(f"documents {len(corpus)}\n")
        for d in corpus.documents:
            ids = " ".join(map(str, d.tokens.tolist()))
            fh.write(f"{d.doc_id}\t{d.label or ''}\t{ids}\n")


def load_corpus(path: str | Path) -> Corpus:
    with open(path, encoding="utf-8") as fh:
        lines = iter(fh)
        if next(lines, "").rstrip("\n") != CORPUS_MAGIC:
            raise ModelFormatError(f"{path}: not a {CORPUS_MAGIC!r} file")
        vocab = read_vocabulary(lines)
        head = next(lines, "").split()
        if len(head) != 2 or head[0] != "documents":
            raise ModelFormatError(f"{path}: missing documents block")
        documents = []
        for _ in range(int(head[1])):
            parts = next(lines, "").rstrip("\n").split("\t")
            if len(parts) != 3:
                raise ModelFormatError(f"{path}: bad document line")
            ids = [int(x) for x in parts[2].split()]
            if any(i >= len(vocab) for i in ids):
                raise ModelFormatError(f"{path}: token id out of range")
            documents.append(Document(int(parts[0]), _readonly(ids), parts[1] or None))
    return Corpus(documents, vocab)


def is_corpus_cache(path: str | Path) -> bool:
    with open(path, encoding="utf-8") as fh:
        return fh.readline().rstrip("\n") == CORPUS_MAGIC
