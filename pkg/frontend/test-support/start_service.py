#!/usr/bin/env python3
"""Spin up an identification service on a synthetic corpus for UI tests.

Generates a small dataset, trains the matcher briefly, writes an info file
(port, per-class signature descriptions) for the test suite, then serves
until killed.
"""

import argparse
import json
import socket
from pathlib import Path

import uvicorn

from fieldguide import matcher, pairs, synth
from fieldguide.corpus import strip_labels
from fieldguide.embed import HashedBowConfig, HashedBowProvider, build_store
from fieldguide.service import ModelSnapshot, build_app


def free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--info-out", required=True)
    parser.add_argument("--static-dir", default=None)
    args = parser.parse_args()

    data = synth.generate(
        synth.SynthConfig(
            n_classes=6, images_per_class=20, captions_per_image=4,
            doc_synonym_rate=0.25, seed=3,
        )
    )
    provider = HashedBowProvider(HashedBowConfig(dim=128, seed=11))
    unlabeled = strip_labels(data.caption_sets)
    cap_store = build_store(
        ((k, c) for u in unlabeled for k, c in zip(u.caption_keys, u.captions)), provider
    )
    doc_store = build_store(data.corpus.iter_sentences(), provider)
    dataset = pairs.build_training_set(
        unlabeled, data.corpus, data.lexicon, pairs.PairGenConfig(seed=5, classes=3)
    )
    cfg = matcher.TrainConfig(
        epochs=8, reg_epochs=1, reg_weight=1.0, seed=7, classes=3,
        proj_dim=64, hidden_dim=64, batch_size=64, reg_image_batch=8,
    )
    params, _ = matcher.train(dataset, cap_store, doc_store, data.corpus, cfg, images=unlabeled)
    snapshot = ModelSnapshot(data.corpus, doc_store, provider, "fgsm", params)

    # Layperson template captions, checked against the trained model so the
    # UI test types a caption known to rank its class first.
    template_captions = {}
    for doc_id, signature in data.signatures.items():
        (p1, c1), (p2, c2) = signature[0], signature[1]
        caption = synth.CAPTION_TEMPLATES[0].format(c1=c1, p1=p1, c2=c2, p2=p2)
        if snapshot.identify([caption], 1, "fgsm").results[0].doc_id == doc_id:
            template_captions[doc_id] = caption
    if len(template_captions) < 2:
        raise SystemExit("synthetic model too weak for the UI flow; retune the setup")

    port = free_port()
    info = {
        "port": port,
        "base_url": f"http://127.0.0.1:{port}",
        "doc_ids": list(data.corpus.doc_ids),
        "class_names": {d.doc_id: d.class_name for d in data.corpus},
        "template_captions": template_captions,
        # Attribute-dense description per class: reliably ranks first.
        "signature_captions": {
            doc_id: ", ".join(f"{color} {part}" for part, color in signature)
            for doc_id, signature in data.signatures.items()
        },
    }
    Path(args.info_out).write_text(json.dumps(info), encoding="utf-8")
    print(f"ready on {info['base_url']}", flush=True)
    app = build_app(snapshot, static_dir=args.static_dir)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
