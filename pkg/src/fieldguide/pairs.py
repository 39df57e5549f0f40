"""Synthetic sentence-pair training sets.

Positives pair captions of the same image, negatives pair captions of
different images, and neutrals pair a caption with a sentence (from the
expert documents or another image's captions) sharing no nouns with it.
Generation is seeded and single-threaded for bit-exact reproducibility;
nothing here ever sees a ground-truth class id.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import Corpus, UnlabeledCaptions
from .errors import DataError
from .text import NounLexicon, extract_nouns, tokenize

logger = logging.getLogger(__name__)

LABELS = ("positive", "negative", "neutral")

# Purpose tags for deriving independent RNG streams from one seed.
_RNG_POSITIVE, _RNG_NEGATIVE, _RNG_NEUTRAL, _RNG_SHUFFLE = range(4)


@dataclass(frozen=True)
class SentencePair:
    a_key: str
    b_key: str
    label: str

    def __post_init__(self):
        if self.a_key == self.b_key:
            raise DataError(f"degenerate pair: {self.a_key!r} paired with itself")
        if self.label not in LABELS:
            raise DataError(f"unknown pair label {self.label!r}")


@dataclass(frozen=True)
class PairGenConfig:
    seed: int = 42
    classes: int = 3
    emit_both_orders: bool = False
    neutral_fraction: float = 1.0 / 3.0
    doc_caption_mix: float = 0.5  # neutral candidates: documents vs foreign captions
    max_attempts_factor: int = 100

    def __post_init__(self):
        if self.classes not in (2, 3):
            raise ValueError(f"classes must be 2 or 3, got {self.classes}")
        if not 0.0 <= self.neutral_fraction <= 1.0:
            raise ValueError("neutral_fraction must be in [0, 1]")
        if not 0.0 <= self.doc_caption_mix <= 1.0:
            raise ValueError("doc_caption_mix must be in [0, 1]")


def _rng(cfg: PairGenConfig, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([cfg.seed, purpose]))


def _flat_captions(captions: Sequence[UnlabeledCaptions]) -> tuple[list[str], list[int], list[int]]:
    """Flatten caption keys; returns (keys, image index per key, image start offsets)."""
    keys: list[str] = []
    image_of: list[int] = []
    starts: list[int] = []
    for i, cs in enumerate(captions):
        starts.append(len(keys))
        keys.extend(cs.caption_keys)
        image_of.extend([i] * len(cs.captions))
    return keys, image_of, starts


def gen_positive(
    captions: Sequence[UnlabeledCaptions], cfg: PairGenConfig
) -> list[SentencePair]:
    """All unordered same-image caption pairs (no self-pairs).

    The a/b order within each pair is a seeded coin flip; with
    ``emit_both_orders`` both orderings are emitted instead. The set of
    unordered pairs is seed-independent.
    """
    rng = _rng(cfg, _RNG_POSITIVE)
    pairs = []
    for cs in captions:
        keys = cs.caption_keys
        for i in range(len(keys)):
            for j in range(i + 1, len(keys)):
                if cfg.emit_both_orders:
                    pairs.append(SentencePair(keys[i], keys[j], "positive"))
                    pairs.append(SentencePair(keys[j], keys[i], "positive"))
                elif rng.integers(2) == 0:
                    pairs.append(SentencePair(keys[i], keys[j], "positive"))
                else:
                    pairs.append(SentencePair(keys[j], keys[i], "positive"))
    return pairs


def _sample_other_image(
    rng: np.random.Generator, total: int, starts: list[int], sizes: list[int], image: int
) -> int:
    """Uniform flat index over captions not belonging to ``image``."""
    r = int(rng.integers(total - sizes[image]))
    if r >= starts[image]:
        r += sizes[image]
    return r


def gen_negative(
    captions: Sequence[UnlabeledCaptions], count: int, cfg: PairGenConfig
) -> list[SentencePair]:
    """Exactly ``count`` cross-image caption pairs, sampled with replacement.

    The first element is uniform over all captions, the second uniform over
    captions of other images.
    """
    if len(captions) < 2:
        raise DataError("negative pairs need captions from at least 2 images")
    rng = _rng(cfg, _RNG_NEGATIVE)
    keys, image_of, starts = _flat_captions(captions)
    sizes = [len(cs.captions) for cs in captions]
    total = len(keys)
    pairs = []
    for _ in range(count):
        a = int(rng.integers(total))
        b = _sample_other_image(rng, total, starts, sizes, image_of[a])
        pairs.append(SentencePair(keys[a], keys[b], "negative"))
    return pairs


def gen_neutral(
    captions: Sequence[UnlabeledCaptions],
    corpus: Corpus,
    lexicon: NounLexicon,
    count: int,
    cfg: PairGenConfig,
) -> list[SentencePair]:
    """``count`` caption/sentence pairs whose noun sets are disjoint.

    Second elements are rejection-sampled from document sentences and other
    images' captions (mix set by ``doc_caption_mix``). If fewer than
    ``count`` pairs are found within ``max_attempts_factor * count``
    attempts, the shortfall is logged and the found pairs returned.
    """
    if count <= 0:
        return []
    if len(corpus) == 0:
        raise DataError("neutral pairs need a non-empty corpus")
    rng = _rng(cfg, _RNG_NEUTRAL)
    keys, image_of, starts = _flat_captions(captions)
    sizes = [len(cs.captions) for cs in captions]
    total = len(keys)

    caption_texts = [c for cs in captions for c in cs.captions]
    caption_nouns = [extract_nouns(tokenize(t), lexicon) for t in caption_texts]
    doc_entries = list(corpus.iter_sentences())
    doc_nouns = [extract_nouns(tokenize(t), lexicon) for _, t in doc_entries]

    pairs: list[SentencePair] = []
    max_attempts = cfg.max_attempts_factor * count
    attempts = 0
    while len(pairs) < count and attempts < max_attempts:
        attempts += 1
        a = int(rng.integers(total))
        if rng.random() < cfg.doc_caption_mix:
            j = int(rng.integers(len(doc_entries)))
            b_key, b_nouns = doc_entries[j][0], doc_nouns[j]
        elif len(captions) > 1:
            j = _sample_other_image(rng, total, starts, sizes, image_of[a])
            b_key, b_nouns = keys[j], caption_nouns[j]
        else:
            continue
        if caption_nouns[a].isdisjoint(b_nouns):
            pairs.append(SentencePair(keys[a], b_key, "neutral"))
    if len(pairs) < count:
        logger.warning(
            "neutral pair shortfall: requested %d, found %d after %d attempts",
            count, len(pairs), attempts,
        )
    return pairs


def build_training_set(
    captions: Sequence[UnlabeledCaptions],
    corpus: Corpus | None,
    lexicon: NounLexicon | None,
    cfg: PairGenConfig,
) -> list[SentencePair]:
    """Balanced, seeded, shuffled training set.

    Two classes: negatives match the positive count 1:1. Three classes: the
    neutral share of the total is ``neutral_fraction`` (the default 1/3
    gives equal thirds), positives and negatives stay 1:1.
    """
    positives = gen_positive(captions, cfg)
    if not positives:
        raise DataError("no positive pairs: every image needs at least 2 captions")
    n_pos = len(positives)
    out = positives + gen_negative(captions, n_pos, cfg)
    if cfg.classes == 3:
        if cfg.neutral_fraction >= 1.0:
            raise DataError("neutral_fraction must be < 1 when positives are present")
        n_neutral = round(2 * n_pos * cfg.neutral_fraction / (1.0 - cfg.neutral_fraction))
        if n_neutral > 0:
            if corpus is None or lexicon is None:
                raise DataError("3-class generation needs a corpus and a noun lexicon")
            out = out + gen_neutral(captions, corpus, lexicon, n_neutral, cfg)
    order = _rng(cfg, _RNG_SHUFFLE).permutation(len(out))
    return [out[i] for i in order]


def save_pairs(pairs: Iterable[SentencePair], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for p in pairs:
            f.write(json.dumps({"a": p.a_key, "b": p.b_key, "label": p.label}) + "\n")


def load_pairs(path: str | Path) -> list[SentencePair]:
    pairs = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                pairs.append(SentencePair(record["a"], record["b"], record["label"]))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise DataError(f"{path}:{lineno}: bad pair record: {e}") from None
    return pairs
