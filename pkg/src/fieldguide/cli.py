"""Command-line pipeline: ingest, embed, gen-pairs, train, score, eval, baseline, serve.

Every command is deterministic given its inputs and --seed (printed when a
command uses randomness). Exit codes: 0 success, 1 usage error, 2 data
error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import baselines, evaluation, matcher, pairs, scoring
from .corpus import load_captions, load_corpus, save_captions, save_corpus, strip_labels
from .embed import (
    HashedBowConfig,
    HashedBowProvider,
    build_store,
    load_store,
    load_store_text,
    save_store,
)
from .errors import DataError, NumericError
from .text import DEFAULT_ABBREVIATIONS, NounLexicon, load_word_list

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); we map usage errors to 1
        raise UsageError(message)


def _limit_threads(n: int | None) -> None:
    if n is None:
        return
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(limits=n)
    except ImportError:
        pass


def cmd_ingest(args) -> int:
    if (args.corpus is None) == (args.captions is None):
        raise UsageError("ingest needs exactly one of --corpus or --captions")
    if args.corpus:
        abbreviations = (
            load_word_list(args.abbreviations) if args.abbreviations else DEFAULT_ABBREVIATIONS
        )
        corpus = load_corpus(args.corpus, abbreviations)
        save_corpus(corpus, args.out)
        n_sentences = sum(len(d.sentences) for d in corpus)
        print(f"{len(corpus)} documents, {n_sentences} sentences -> {args.out}")
    else:
        caption_sets = load_captions(args.captions)
        save_captions(caption_sets, args.out)
        n_caps = sum(len(c.captions) for c in caption_sets)
        labelled = sum(c.class_id is not None for c in caption_sets)
        print(
            f"{len(caption_sets)} images, {n_caps} captions "
            f"({labelled} with evaluation labels) -> {args.out}"
        )
    return EXIT_OK


def cmd_embed(args) -> int:
    sources = [s for s in (args.corpus, args.captions, getattr(args, "import_path")) if s]
    if len(sources) != 1:
        raise UsageError("embed needs exactly one of --corpus, --captions, --import")
    if args.import_path:
        store = load_store_text(args.import_path)
        save_store(store, args.out)
        print(f"imported {len(store)} vectors (dim {store.dim}) -> {args.out}")
        return EXIT_OK
    print(f"seed: {args.seed}")
    provider = HashedBowProvider(HashedBowConfig(dim=args.dim, seed=args.seed))
    if args.corpus:
        items = list(load_corpus(args.corpus).iter_sentences())
    else:
        items = [
            (key, text)
            for cs in load_captions(args.captions)
            for key, text in zip(cs.caption_keys, cs.captions)
        ]
    store = build_store(items, provider)
    save_store(store, args.out)
    print(f"embedded {len(store)} sentences (dim {store.dim}) -> {args.out}")
    return EXIT_OK


def cmd_gen_pairs(args) -> int:
    print(f"seed: {args.seed}")
    images = strip_labels(load_captions(args.captions))
    corpus = load_corpus(args.corpus) if args.corpus else None
    lexicon = NounLexicon.from_file(args.lexicon) if args.lexicon else None
    cfg = pairs.PairGenConfig(
        seed=args.seed,
        classes=args.classes,
        emit_both_orders=args.emit_both_orders,
        neutral_fraction=args.neutral_fraction,
        doc_caption_mix=args.doc_caption_mix,
    )
    dataset = pairs.build_training_set(images, corpus, lexicon, cfg)
    pairs.save_pairs(dataset, args.out)
    counts = {label: 0 for label in pairs.LABELS}
    for p in dataset:
        counts[p.label] += 1
    summary = ", ".join(f"{v} {k}" for k, v in counts.items() if v)
    print(f"{len(dataset)} pairs ({summary}) -> {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    print(f"seed: {args.seed}")
    cfg = matcher.TrainConfig(
        learning_rate=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        reg_epochs=args.reg_epochs,
        reg_weight=args.reg_weight,
        seed=args.seed,
        classes=args.classes,
        proj_dim=args.proj_dim,
        hidden_dim=args.hidden_dim,
        reg_image_batch=args.reg_image_batch,
        reg_doc_sample=args.reg_doc_sample,
    )
    run_phase2 = cfg.reg_weight > 0.0 and cfg.reg_epochs > 0
    if run_phase2 and not (args.doc_store and args.corpus and args.captions):
        raise UsageError(
            "training with --reg-weight > 0 needs --doc-store, --corpus and --captions"
        )
    dataset = pairs.load_pairs(args.pairs)
    caption_store = load_store(args.caption_store)
    doc_store = load_store(args.doc_store) if args.doc_store else None
    corpus = load_corpus(args.corpus) if args.corpus else None
    images = strip_labels(load_captions(args.captions)) if args.captions else None
    params, history = matcher.train(dataset, caption_store, doc_store, corpus, cfg, images)
    matcher.save_checkpoint(params, args.out)
    if args.log:
        matcher.write_train_log(history, args.log)
    last = history[-1]
    print(
        f"trained {len(dataset)} pairs for {len(history)} epochs "
        f"(final pair loss {last.pair_loss:.4f}) -> {args.out}"
    )
    return EXIT_OK


def cmd_score(args) -> int:
    corpus = load_corpus(args.corpus)
    caption_sets = load_captions(args.captions)
    caption_store = load_store(args.caption_store)
    doc_store = load_store(args.doc_store)
    params = matcher.load_checkpoint(args.checkpoint) if args.checkpoint else None
    if args.mode == "fgsm" and params is None:
        raise UsageError("--mode fgsm needs --checkpoint")
    ctx = scoring.ScoringContext(corpus, doc_store, params, args.mode, args.negate_scores)
    results = [ctx.score(cs, caption_store) for cs in caption_sets]
    scoring.write_scores(results, args.out, method=args.mode)
    print(f"scored {len(results)} images over {len(corpus)} documents -> {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    records = scoring.read_scores(args.scores)
    truth = {}
    for cs in load_captions(args.captions):
        if cs.class_id is None:
            raise DataError(f"image {cs.image_id!r} has no class_id; cannot evaluate")
        truth[cs.image_id] = cs.class_id
    rankings = {r["image_id"]: r["ranking"] for r in records}
    method = args.method or (records[0].get("method", "fgsm") if records else "fgsm")
    result = evaluation.evaluate(rankings, truth)
    report = evaluation.format_report([(method, result)])
    print(report, end="")
    if args.report:
        Path(args.report).write_text(report, encoding="utf-8")
    if args.per_class:
        evaluation.write_per_class(result, args.per_class)
    return EXIT_OK


def cmd_baseline(args) -> int:
    corpus = load_corpus(args.corpus)
    caption_sets = load_captions(args.captions)
    ngram_sizes = tuple(int(s) for s in args.ngram_sizes.split(","))
    if args.method == "tfidf":
        index = baselines.build_tfidf(corpus, ngram_sizes)
        rank = lambda caps: baselines.tfidf_rank(index, caps, args.aggregate)
    else:
        index = baselines.build_bm25(corpus)
        rank = lambda caps: baselines.bm25_rank(index, caps, args.aggregate)
    results = []
    for cs in caption_sets:
        ranked = rank(list(cs.captions))
        by_id = dict(ranked)
        z = np.array([by_id[d] for d in corpus.doc_ids])
        probs, ranking = scoring.rank_scores(z, corpus.doc_ids)
        results.append(scoring.DocScores(cs.image_id, z, probs, ranking))
    scoring.write_scores(results, args.out, method=args.method)
    print(f"ranked {len(results)} images with {args.method} -> {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import build_app, load_snapshot

    provider = HashedBowProvider(HashedBowConfig(dim=args.dim, seed=args.seed))
    snapshot = load_snapshot(
        args.corpus,
        args.store,
        args.checkpoint,
        args.mode,
        provider,
        negate_scores=args.negate_scores,
    )
    app = build_app(snapshot, static_dir=args.static_dir, session_log=args.log_sessions)
    host, _, port = args.addr.rpartition(":")
    print(f"serving {len(snapshot.corpus)} documents on http://{args.addr} (mode {snapshot.mode})")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="warning")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="fieldguide", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="validate and canonicalize corpus/caption files")
    p.add_argument("--corpus")
    p.add_argument("--captions")
    p.add_argument("--abbreviations", help="abbreviation list for sentence splitting")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("embed", help="precompute sentence embeddings into a store")
    p.add_argument("--corpus")
    p.add_argument("--captions")
    p.add_argument("--import", dest="import_path", help="text-format vectors to import")
    p.add_argument("--provider", choices=["hashed-bow"], default="hashed-bow")
    p.add_argument("--dim", type=int, default=256)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("gen-pairs", help="build the sentence-pair training set")
    p.add_argument("--captions", required=True)
    p.add_argument("--corpus", help="expert corpus (needed for neutral pairs)")
    p.add_argument("--lexicon", help="noun lexicon file (needed for neutral pairs)")
    p.add_argument("--classes", type=int, choices=[2, 3], default=3)
    p.add_argument("--neutral-fraction", type=float, default=1.0 / 3.0)
    p.add_argument("--doc-caption-mix", type=float, default=0.5)
    p.add_argument("--emit-both-orders", action="store_true")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_pairs)

    p = sub.add_parser("train", help="train the sentence matcher")
    p.add_argument("--pairs", required=True)
    p.add_argument("--caption-store", required=True)
    p.add_argument("--doc-store")
    p.add_argument("--corpus")
    p.add_argument("--captions", help="caption file for regularizer image batches")
    p.add_argument("--classes", type=int, choices=[2, 3], default=3)
    p.add_argument("--proj-dim", type=int, default=128)
    p.add_argument("--hidden-dim", type=int, default=128)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--reg-epochs", type=int, default=1)
    p.add_argument("--reg-weight", type=float, default=1.0)
    p.add_argument("--reg-image-batch", type=int, default=16)
    p.add_argument("--reg-doc-sample", type=int, default=None)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--log", help="write per-epoch loss log here")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("score", help="score caption sets against the corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--captions", required=True)
    p.add_argument("--caption-store", required=True)
    p.add_argument("--doc-store", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--mode", choices=["fgsm", "cosine"], default="fgsm")
    p.add_argument("--negate-scores", action="store_true",
                   help="use the inverted softmax convention (probability falls with score)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("eval", help="compute retrieval metrics from a scores dump")
    p.add_argument("--scores", required=True)
    p.add_argument("--captions", required=True, help="caption file with class_id labels")
    p.add_argument("--method", help="method name for the report row")
    p.add_argument("--report", help="write the report table here")
    p.add_argument("--per-class", help="write per-class metrics here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="rank with TF-IDF or BM25")
    p.add_argument("--method", choices=["tfidf", "bm25"], required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--captions", required=True)
    p.add_argument("--ngram-sizes", default="2,3")
    p.add_argument("--aggregate", choices=list(baselines.AGGREGATES), default="concat")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("serve", help="run the identification service")
    p.add_argument("--addr", default="127.0.0.1:8000")
    p.add_argument("--corpus", required=True)
    p.add_argument("--store", required=True, help="document embedding store")
    p.add_argument("--checkpoint")
    p.add_argument("--mode", choices=["fgsm", "cosine", "tfidf", "bm25"], default="fgsm")
    p.add_argument("--dim", type=int, default=256)
    p.add_argument("--seed", type=int, default=42, help="live caption provider seed")
    p.add_argument("--negate-scores", action="store_true")
    p.add_argument("--static-dir", help="built UI assets to serve under /")
    p.add_argument("--log-sessions", help="opt-in anonymized session log (JSONL)")
    p.set_defaults(func=cmd_serve)

    for sp in sub.choices.values():
        sp.add_argument("--threads", type=int, default=None, help="cap BLAS worker threads")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _limit_threads(args.threads)
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as e:
        print(f"numeric error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
