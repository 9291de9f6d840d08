"""Topic keyword model: keyword-score driven topic inference over word sequences."""

from .corpus import (
    Corpus,
    Document,
    PreprocessOptions,
    Vocabulary,
    build_corpus,
    encode_document,
    tokenize_and_preprocess,
)
from .infer import DocTopics, assign_unseen, export_features, infer_topics
from .metrics import build_cooc_index, match_topics, model_pmi, pmi_pair, toc
from .model import Hyperparams, ModelState, TrainedModel, load_model, save_model, top_words
from .selfreg import distinct_topics, skl
from .trainer import train

__version__ = "0.1.0"

__all__ = [
    "Corpus",
    "Document",
    "DocTopics",
    "Hyperparams",
    "ModelState",
    "PreprocessOptions",
    "TrainedModel",
    "Vocabulary",
    "assign_unseen",
    "build_cooc_index",
    "build_corpus",
    "distinct_topics",
    "encode_document",
    "export_features",
    "infer_topics",
    "load_model",
    "match_topics",
    "model_pmi",
    "pmi_pair",
    "save_model",
    "skl",
    "tokenize_and_preprocess",
    "toc",
    "top_words",
    "train",
]
