"""Command-line interface.

Exit codes: 0 success, 2 usage or invalid hyperparameters, 3 input error
(unreadable file, empty corpus or reference), 4 malformed model/cache file,
5 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

from . import corpus as corpus_mod
from .corpus import PreprocessOptions, build_corpus, encode_corpus, load_stopwords, read_documents
from .errors import EmptyCorpus, EmptyReference, InvalidHyperparams, ModelFormatError, TKMError
from .infer import assign_unseen, export_features, infer_topics
from .metrics import (
    build_cooc_index,
    model_pmi,
    model_top_words,
    toc,
    write_report,
)
from .model import Hyperparams, load_model, save_model, top_words
from .selfreg import distinct_topics
from .trainer import train

logger = logging.getLogger("tkm")

EXIT_USAGE, EXIT_INPUT, EXIT_FORMAT, EXIT_INTERNAL = 2, 3, 4, 5
LOG_FIELDS = ["sweep", "active_topics", "changed_fraction", "max_delta_f", "elapsed_ms"]


def default_workers() -> int:
    env = os.environ.get("TKM_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _add_preprocess_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("preprocessing")
    g.add_argument("--labeled", action="store_true", help="input lines are 'label<TAB>text'")
    g.add_argument("--stopwords", metavar="SRC", help="stopword file, or 'english' for the bundled list")
    g.add_argument("--stem", action="store_true", help="apply the Snowball English stemmer")
    g.add_argument("--no-lowercase", dest="lowercase", action="store_false", help="keep letter case")
    g.add_argument("--min-count", type=int, default=2, help="drop words occurring fewer times overall")
    g.add_argument("--min-doc-tokens", type=int, default=1, help="drop shorter documents")


def _add_hyperparam_args(p: argparse.ArgumentParser) -> None:
    d = Hyperparams()
    g = p.add_argument_group("hyperparameters")
    g.add_argument("--k", type=int, default=d.k, help="upper bound on the number of topics")
    g.add_argument("--alpha", type=float, default=d.alpha, help="topic concentration exponent")
    g.add_argument("--beta", type=float, default=d.beta, help="word prior (pseudo-count)")
    g.add_argument("--delta", type=float, default=d.delta, help="concentration weight exponent")
    g.add_argument("--window", "-L", dest="L", type=int, default=d.L, help="window half-width in tokens")
    g.add_argument("--gamma", type=float, default=d.gamma, help="SKL pruning threshold (nats)")
    g.add_argument("--seed", type=int, default=d.seed, help="random seed")
    g.add_argument("--max-sweeps", type=int, default=d.max_sweeps, help="sweep cap")
    g.add_argument("--assign-tol", type=float, default=d.assign_change_tol,
                   help="stop when fewer tokens than this fraction change topic")
    g.add_argument("--score-tol", type=float, default=d.score_change_tol,
                   help="stop when no keyword score moves more than this")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="tkm", description="Topic keyword model toolkit", formatter_class=fmt)
    parser.add_argument("-v", "--verbose", action="count", default=0)
    parser.add_argument("--workers", type=int, default=None,
                        help="worker threads (default: $TKM_WORKERS or CPU count)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="encode a raw corpus into a cache file", formatter_class=fmt)
    p.add_argument("--corpus", required=True, help="one document per line")
    p.add_argument("--out", required=True)
    _add_preprocess_args(p)

    p = sub.add_parser("train", help="train a model", formatter_class=fmt)
    p.add_argument("--corpus", required=True, help="raw text or encoded corpus cache")
    p.add_argument("--out", required=True, help="model file")
    p.add_argument("--log", help="per-sweep CSV training log (default: <out>.log.csv)")
    _add_preprocess_args(p)
    _add_hyperparam_args(p)

    p = sub.add_parser("topics", help="show top words per topic", formatter_class=fmt)
    p.add_argument("--model", required=True)
    p.add_argument("--top", type=int, default=10, help="words per topic")
    p.add_argument("--format", choices=["text", "csv"], default="text")

    p = sub.add_parser("infer", help="infer topic distributions for new documents", formatter_class=fmt)
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True, help="one document per line")
    p.add_argument("--labeled", action="store_true")
    p.add_argument("--out", help="CSV of p(t|d) rows (default: stdout)")
    p.add_argument("--assignments-out", help="write per-token topic ids here")

    p = sub.add_parser("prune", help="keep only distinct topics of a saved model", formatter_class=fmt)
    p.add_argument("--model", required=True)
    p.add_argument("--gamma", type=float, default=Hyperparams().gamma)
    p.add_argument("--out", required=True)

    p = sub.add_parser("eval", help="compute evaluation metrics", formatter_class=fmt)
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", help="documents for the toc metric")
    p.add_argument("--labeled", action="store_true")
    p.add_argument("--metric", nargs="+", choices=["toc", "pmi", "distinct"], default=["toc"])
    p.add_argument("--reference", help="reference corpus for pmi, one document per line")
    p.add_argument("--gamma", type=float, default=Hyperparams().gamma)
    p.add_argument("--top", type=int, default=10, help="top words per topic for pmi")
    p.add_argument("--out", help="CSV report (default: stdout)")

    p = sub.add_parser("export-features", help="write p(t|d) features for classification", formatter_class=fmt)
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--labeled", action="store_true")
    p.add_argument("--out", required=True)
    return parser


def _preprocess_options(args) -> PreprocessOptions:
    stop = load_stopwords(args.stopwords) if args.stopwords else None
    return PreprocessOptions(
        lowercase=args.lowercase,
        stopwords=stop,
        stem=args.stem,
        min_global_count=args.min_count,
        min_doc_tokens=args.min_doc_tokens,
    )


def _hyperparams(args) -> Hyperparams:
    return Hyperparams(
        k=args.k, alpha=args.alpha, beta=args.beta, delta=args.delta, L=args.L, gamma=args.gamma,
        seed=args.seed, max_sweeps=args.max_sweeps, assign_change_tol=args.assign_tol,
        score_change_tol=args.score_tol,
    ).validate()


def _load_training_corpus(args, opts):
    if corpus_mod.is_corpus_cache(args.corpus):
        return corpus_mod.load_corpus(args.corpus)
    return build_corpus(read_documents(args.corpus, args.labeled), opts)


def _encode_for_model(path, model, labeled, keep_empty=False):
    if corpus_mod.is_corpus_cache(path):
        c = corpus_mod.load_corpus(path)
        if c.vocabulary.id_to_word != model.vocabulary.id_to_word:
            raise ModelFormatError(f"{path}: corpus cache vocabulary differs from the model's")
        return c
    return encode_corpus(read_documents(path, labeled), model.vocabulary, model.preprocess, keep_empty)


def _open_out(path):
    if path:
        return open(path, "w", encoding="utf-8", newline="")
    return _Stdout()


class _Stdout:
    def __enter__(self):
        return sys.stdout

    def __exit__(self, *exc):
        sys.stdout.flush()


def cmd_preprocess(args) -> int:
    c = build_corpus(read_documents(args.corpus, args.labeled), _preprocess_options(args))
    corpus_mod.save_corpus(c, args.out)
    logger.info("%d documents, %d words, %d tokens", len(c), len(c.vocabulary), c.total_tokens)
    return 0


def cmd_train(args) -> int:
    hp = _hyperparams(args)
    opts = _preprocess_options(args)
    c = _load_training_corpus(args, opts)
    log_path = args.log or f"{args.out}.log.csv"
    with open(log_path, "w", encoding="utf-8", newline="") as log_fh:
        writer = csv.DictWriter(log_fh, fieldnames=LOG_FIELDS, lineterminator="\n")
        writer.writeheader()

        def on_sweep(row):
            writer.writerow(row)
            log_fh.flush()

        model = train(c, hp, workers=args.workers, preprocess=opts, on_sweep=on_sweep)
    save_model(model, args.out)
    logger.info("trained %d topics in %d sweeps (%s)", model.n_topics, model.sweeps_run, model.convergence)
    return 0


def cmd_topics(args) -> int:
    model = load_model(args.model)
    mass = model.topic_mass()
    out = sys.stdout
    if args.format == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(["topic", "mass", "rank", "word", "f_hu"])
        for col, t in enumerate(model.active_topics.tolist()):
            for rank, (w, s) in enumerate(top_words(model, t, args.top), 1):
                writer.writerow([t, int(mass[col]), rank, w, format(s, ".17g")])
    else:
        for col, t in enumerate(model.active_topics.tolist()):
            words = top_words(model, t, args.top)
            out.write(f"topic {t} (mass {int(mass[col])})\n")
            for w, s in words:
                out.write(f"  {w:<24} {s:.6f}\n")
    return 0


def cmd_infer(args) -> int:
    model = load_model(args.model)
    docs = _encode_for_model(args.input, model, args.labeled, keep_empty=True)
    header = ["doc_id"] + [f"t{t}" for t in model.active_topics.tolist()]
    assign_fh = open(args.assignments_out, "w", encoding="utf-8") if args.assignments_out else None
    try:
        with _open_out(args.out) as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            for d in docs.documents:
                dt = infer_topics(model, d.tokens, d.doc_id)
                writer.writerow([d.doc_id] + [format(x, ".17g") for x in dt.probs])
                if assign_fh is not None:
                    ids = assign_unseen(model, d.tokens, dt)
                    assign_fh.write(f"{d.doc_id}\t{' '.join(map(str, ids.tolist()))}\n")
    finally:
        if assign_fh is not None:
            assign_fh.close()
    return 0


def cmd_prune(args) -> int:
    model = load_model(args.model)
    if model.hyperparams.beta <= 0:
        raise InvalidHyperparams("model has beta=0; divergences need smoothing")
    keep = distinct_topics(model, args.gamma, model.hyperparams.beta)
    pruned = model.subset(keep)
    save_model(pruned, args.out)
    logger.info("kept %d of %d topics", pruned.n_topics, model.n_topics)
    return 0


def _reference_docs(path, opts):
    for _, text in read_documents(path):
        yield corpus_mod.tokenize_and_preprocess(text, opts)


def cmd_eval(args) -> int:
    model = load_model(args.model)
    rows = []
    if "toc" in args.metric:
        if not args.corpus:
            raise _UsageError("--corpus is required for the toc metric")
        c = _encode_for_model(args.corpus, model, args.labeled)
        rows.append(("toc", None, toc(model, c)))
    if "pmi" in args.metric:
        if not args.reference:
            raise _UsageError("--reference is required for the pmi metric")
        tops = model_top_words(model, args.top)
        words = {w for ws in tops.values() for w in ws}
        index = build_cooc_index(_reference_docs(args.reference, model.preprocess), words)
        report = model_pmi(model, index, args.top)
        rows.append(("pmi", None, report.score))
        rows.extend(("pmi", t, v) for t, v in report.per_topic.items())
    if "distinct" in args.metric:
        keep = distinct_topics(model, args.gamma, model.hyperparams.beta)
        rows.append(("distinct_topics", None, len(keep)))
        rows.extend(("distinct_kept", int(t), 1) for t in keep)
    with _open_out(args.out) as fh:
        write_report(rows, fh)
    return 0


def cmd_export(args) -> int:
    model = load_model(args.model)
    c = _encode_for_model(args.corpus, model, args.labeled, keep_empty=True)
    export_features(model, c, args.out)
    return 0


class _UsageError(TKMError):
    pass


COMMANDS = {
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "topics": cmd_topics,
    "infer": cmd_infer,
    "prune": cmd_prune,
    "eval": cmd_eval,
    "export-features": cmd_export,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.workers is None:
        args.workers = default_workers()
    try:
        return COMMANDS[args.command](args)
    except (InvalidHyperparams, _UsageError) as exc:
        print(f"tkm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelFormatError as exc:
        print(f"tkm: model format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (OSError, EmptyCorpus, EmptyReference, ValueError) as exc:
        print(f"tkm: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (AssertionError, TKMError) as exc:
        print(f"tkm: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
