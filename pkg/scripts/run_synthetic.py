#!/usr/bin/env python3
"""End-to-end experiment on the synthetic bird corpus.

Generates a dataset, trains the matcher in its binary and 3-class+regularizer
configurations, runs the IR baselines, and prints a comparison table
(top-1 / top-5 / mean rank, macro-averaged). Artifacts land in --outdir so
the service can be pointed at them afterwards:

    python scripts/run_synthetic.py --outdir build/synth
    fieldguide serve --corpus build/synth/corpus.jsonl --store build/synth/docs.emb \\
        --checkpoint build/synth/model_3cls.ckpt --dim 256 --seed 11
"""

import argparse
import time
from pathlib import Path

from fieldguide import evaluation, matcher, pairs, scoring, synth
from fieldguide.baselines import build_bm25, build_tfidf, bm25_rank, tfidf_rank
from fieldguide.corpus import strip_labels
from fieldguide.embed import HashedBowConfig, HashedBowProvider, build_store, save_store
from fieldguide.evaluation import expected_random_metrics, format_report


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--outdir", default="build/synth")
    parser.add_argument("--classes", type=int, default=20)
    parser.add_argument("--images-per-class", type=int, default=30)
    parser.add_argument("--dim", type=int, default=256)
    parser.add_argument("--data-seed", type=int, default=7)
    parser.add_argument("--train-seed", type=int, default=7)
    parser.add_argument("--embed-seed", type=int, default=11)
    parser.add_argument("--epochs", type=int, default=6)
    parser.add_argument("--reg-epochs", type=int, default=1)
    args = parser.parse_args()

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.time()

    data = synth.generate(
        synth.SynthConfig(
            n_classes=args.classes,
            images_per_class=args.images_per_class,
            seed=args.data_seed,
        )
    )
    synth.write_dataset(data, outdir)
    print(f"dataset: {len(data.corpus)} classes, {len(data.caption_sets)} images")

    provider = HashedBowProvider(HashedBowConfig(dim=args.dim, seed=args.embed_seed))
    unlabeled = strip_labels(data.caption_sets)
    cap_store = build_store(
        ((k, c) for u in unlabeled for k, c in zip(u.caption_keys, u.captions)), provider
    )
    doc_store = build_store(data.corpus.iter_sentences(), provider)
    save_store(cap_store, outdir / "caps.emb")
    save_store(doc_store, outdir / "docs.emb")

    truth = {cs.image_id: cs.class_id for cs in data.caption_sets}

    def evaluate_rankings(rankings):
        return evaluation.evaluate(rankings, truth)

    rows = []
    top, mr = expected_random_metrics(len(data.corpus))
    rows.append(("random guess", evaluation.EvalResult(top[1], top[5], mr, {})))

    tfidf = build_tfidf(data.corpus)
    rows.append((
        "tfidf",
        evaluate_rankings({
            cs.image_id: [d for d, _ in tfidf_rank(tfidf, list(cs.captions))]
            for cs in data.caption_sets
        }),
    ))
    bm25 = build_bm25(data.corpus)
    rows.append((
        "bm25",
        evaluate_rankings({
            cs.image_id: [d for d, _ in bm25_rank(bm25, list(cs.captions))]
            for cs in data.caption_sets
        }),
    ))

    cosine_ctx = scoring.ScoringContext(data.corpus, doc_store, None, mode="cosine")
    rows.append((
        "cosine",
        evaluate_rankings({
            cs.image_id: cosine_ctx.score(cs, cap_store).ranking
            for cs in data.caption_sets
        }),
    ))

    def train_and_eval(classes, reg_epochs, reg_weight, tag):
        dataset = pairs.build_training_set(
            unlabeled, data.corpus, data.lexicon,
            pairs.PairGenConfig(seed=5, classes=classes),
        )
        cfg = matcher.TrainConfig(
            epochs=args.epochs, reg_epochs=reg_epochs, reg_weight=reg_weight,
            seed=args.train_seed, classes=classes, batch_size=128, reg_image_batch=8,
        )
        params, history = matcher.train(
            dataset, cap_store, doc_store, data.corpus, cfg, images=unlabeled
        )
        matcher.save_checkpoint(params, outdir / f"model_{tag}.ckpt")
        matcher.write_train_log(history, outdir / f"train_{tag}.log")
        ctx = scoring.ScoringContext(data.corpus, doc_store, params, mode="fgsm")
        return evaluate_rankings({
            cs.image_id: ctx.score(cs, cap_store).ranking for cs in data.caption_sets
        })

    rows.append(("matcher binary", train_and_eval(2, 0, 0.0, "binary")))
    rows.append(("matcher 3cls + reg", train_and_eval(3, args.reg_epochs, 1.0, "3cls")))

    report = format_report(rows)
    print()
    print(report, end="")
    (outdir / "report.txt").write_text(report, encoding="utf-8")
    print(f"\nartifacts in {outdir} ({time.time() - t0:.0f}s)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
