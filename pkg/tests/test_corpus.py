import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import DATA
from tkm.corpus import (
    PreprocessOptions,
    build_corpus,
    encode_corpus,
    encode_document,
    english_stemmer,
    load_corpus,
    load_stopwords,
    read_documents,
    save_corpus,
    tokenize_and_preprocess,
)
from tkm.errors import EmptyCorpus, ModelFormatError


def test_empty_text_gives_no_tokens():
    assert tokenize_and_preprocess("", PreprocessOptions()) == []


def test_lowercase_and_stopwords():
    opts = PreprocessOptions(stopwords=frozenset({"the"}))
    assert tokenize_and_preprocess("The car, the CAR!", opts) == ["car", "car"]


def test_stemming_merges_inflections():
    toks = tokenize_and_preprocess("Running runs", PreprocessOptions(stem=True))
    assert len(toks) == 2 and toks[0] == toks[1]


def test_stemmer_golden_file():
    stem = english_stemmer()
    for line in (DATA / "stem_golden.tsv").read_text().splitlines():
        word, expected = line.split("\t")
        assert stem(word) == expected, word


def test_bundled_stopwords():
    words = load_stopwords("english")
    assert "the" in words and "car" not in words


def test_rare_word_dropped():
    c = build_corpus([(None, "a b"), (None, "a c"), (None, "b a")])
    assert "c" not in c.vocabulary and set(c.vocabulary.id_to_word) == {"a", "b"}


def test_hand_counted_corpus():
    c = build_corpus([(None, "a b a"), (None, "b c c")])
    assert len(c.vocabulary) == 3 and c.total_tokens == 6
    assert c.vocabulary.id_to_word == ["a", "b", "c"]
    assert c.vocabulary.global_count.tolist() == [2, 2, 2]
    assert c.documents[0].tokens.tolist() == [0, 1, 0]


def test_all_stopword_document_dropped(caplog):
    opts = PreprocessOptions(stopwords=frozenset({"the", "a"}))
    c = build_corpus([(None, "the a the"), (None, "x y x y")], opts)
    assert len(c) == 1 and c.documents[0].doc_id == 1
    assert "dropped 1" in caplog.text


def test_empty_corpus_raises():
    opts = PreprocessOptions(stopwords=frozenset({"the"}))
    with pytest.raises(EmptyCorpus):
        build_corpus([(None, "the the")], opts)
    with pytest.raises(EmptyCorpus):
        build_corpus([])


def test_short_document_filter_iterates_to_fixpoint():
    # dropping the short doc removes the only other "z", which empties doc 2
    docs = [(None, "a a a"), (None, "z"), (None, "z b b b")]
    c = build_corpus(docs, PreprocessOptions(min_doc_tokens=2))
    assert [d.doc_id for d in c.documents] == [0, 2]
    assert "z" not in c.vocabulary


def test_encode_document_cases():
    c = build_corpus([(None, "apple pear apple"), (None, "pear plum plum")])
    opts = PreprocessOptions()
    assert encode_document("kiwi mango", c.vocabulary, opts).tolist() == []
    assert encode_document("plum kiwi apple", c.vocabulary, opts).tolist() == [2, 0]
    assert encode_document("apple pear apple", c.vocabulary, opts).tolist() == [0, 1, 0]


def test_tokens_are_read_only():
    c = build_corpus([(None, "a a")])
    with pytest.raises(ValueError):
        c.documents[0].tokens[0] = 1


def test_doc_term_matrix_matches_tokens():
    c = build_corpus([(None, "a b a"), (None, "b c c")])
    assert c.doc_term_matrix.toarray().tolist() == [[2, 1, 0], [0, 1, 2]]


def test_read_documents_labeled(tmp_path):
    p = tmp_path / "d.txt"
    p.write_text("sport\tball game\nno label here\n", encoding="utf-8")
    assert list(read_documents(p, labeled=True)) == [("sport", "ball game"), (None, "no label here")]
    assert list(read_documents(p)) == [(None, "sport\tball game"), (None, "no label here")]


def test_corpus_cache_round_trip(tmp_path):
    c = build_corpus([("x", "a b a"), (None, "b c c")])
    save_corpus(c, tmp_path / "c.tkc")
    back = load_corpus(tmp_path / "c.tkc")
    assert back.vocabulary == c.vocabulary
    assert [(d.doc_id, d.label, d.tokens.tolist()) for d in back.documents] == [
        (d.doc_id, d.label, d.tokens.tolist()) for d in c.documents
    ]


def test_corrupt_cache_rejected(tmp_path):
    p = tmp_path / "bad.tkc"
    p.write_text("TKMCORPUS 1\nvocabulary 1\n0\ta\t2\ndocuments 1\n0\t\t0 5\n")
    with pytest.raises(ModelFormatError):
        load_corpus(p)


def test_encode_corpus_keeps_stream_positions():
    c = build_corpus([(None, "a b a b")])
    enc = encode_corpus([(None, "zzz"), ("l", "b")], c.vocabulary, PreprocessOptions())
    assert [(d.doc_id, d.label) for d in enc.documents] == [(1, "l")]


words = st.sampled_from(["alpha", "beta", "gamma", "delta", "Eps", "the", "x1", "_y"])
docs = st.lists(st.lists(words, min_size=0, max_size=12).map(" ".join), min_size=1, max_size=15)


@settings(max_examples=80, deadline=None)
@given(docs)
def test_build_corpus_invariants(texts):
    opts = PreprocessOptions(stopwords=frozenset({"the"}))
    stream = [(None, t) for t in texts]
    try:
        c = build_corpus(stream, opts)
    except EmptyCorpus:
        return
    vocab = c.vocabulary
    # bijection and count sums
    assert all(vocab.word_to_id[w] == i for i, w in enumerate(vocab.id_to_word))
    assert int(vocab.global_count.sum()) == c.total_tokens
    assert np.array_equal(np.bincount(c.flat_tokens, minlength=len(vocab)), vocab.global_count)
    # re-encoding reproduces stored sequences
    for d in c.documents:
        again = encode_document(texts[d.doc_id], vocab, opts)
        assert again.tolist() == d.tokens.tolist()
    # determinism
    c2 = build_corpus(stream, opts)
    assert c2.vocabulary == vocab
    assert all(np.array_equal(a.tokens, b.tokens) for a, b in zip(c.documents, c2.documents))
