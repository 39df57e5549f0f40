"""Seeded synthetic bird-identification datasets for tests and demos.

Each class gets a signature of (part, color) attributes drawn from a shared
vocabulary. Captions describe one or two signature attributes through
layperson templates; each class document mixes visual sentences (using the
signature) with distractor sentences about range and behavior that share no
nouns with any caption. Class bags of words are kept distinct so classes
are separable in principle.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import CaptionSet, Corpus, Document, save_captions, save_corpus
from .text import NounLexicon

COLORS = (
    "red", "blue", "yellow", "green", "black",
    "white", "orange", "brown", "grey", "purple",
)
# Expert wording used by documents in place of the layperson color: this is
# the caption-to-corpus domain gap that pair training alone cannot bridge.
COLOR_SYNONYMS = {
    "red": "crimson",
    "blue": "azure",
    "yellow": "golden",
    "green": "olive",
    "black": "sooty",
    "white": "ivory",
    "orange": "rufous",
    "brown": "chestnut",
    "grey": "slate",
    "purple": "violet",
}
PARTS = ("crown", "wing", "breast", "tail", "beak", "throat", "back", "belly")

# Every caption names the bird, so caption noun sets always intersect the
# visual document sentences and neutral mining cannot relabel visual content.
CAPTION_TEMPLATES = (
    "a bird with a {c1} {p1} and a {c2} {p2}",
    "this bird has a {c1} {p1} and its {p2} is {c2}",
    "the bird has a {c1} {p1} and a {c2} {p2}",
    "a small bird with a {c1} {p1}",
    "you can see a bird with a {c1} {p1} and a {c2} {p2}",
    "this bird shows a {c1} {p1} next to a {c2} {p2}",
)

# Caption-flavored wording, and every sentence names the bird: visual
# sentences share a noun with bird captions, so neutral mining draws its
# document-side examples from the distractor sentences below.
VISUAL_TEMPLATES = (
    "This bird has a {c} {p}.",
    "The bird shows a {c} {p}.",
    "A bird with a {c} {p}.",
    "The {p} of this bird is {c}.",
    "Look for a bird with a {c} {p}.",
    "An adult bird has a {c} {p}.",
)

# Range/behavior sentences built from per-class fillers: each document gets
# its own non-visual vocabulary, the way real encyclopedia entries do.
DISTRACTOR_TEMPLATES = (
    "It winters in {place}.",
    "The species breeds in {habitat} during late spring.",
    "It feeds mainly on {food}.",
    "The song is a {sound} given from {spot}.",
    "Nests are usually hidden in {nestspot}.",
    "Large flocks gather near {place2} in autumn.",
)

PLACES = (
    "coastal marshes", "the southern lowlands", "river deltas", "upland moors",
    "sheltered valleys", "the western foothills", "tidal lagoons", "juniper steppe",
    "mangrove fringes", "the central plateau", "alpine meadows", "desert oases",
)
HABITATS = (
    "open woodland", "dense scrub", "reed beds", "old orchards", "pine forest",
    "hedgerows", "wet grassland", "bamboo thickets", "willow carr", "heathland",
)
FOODS = (
    "seeds and berries", "small insects", "pond snails", "pine kernels",
    "fallen grain", "spiders and moths", "ripe figs", "grass shoots",
    "beetle larvae", "crustaceans",
)
SOUNDS = (
    "thin whistle", "sharp trill", "low churr", "metallic chink", "buzzing reel",
    "fluty warble", "dry rattle", "soft purr", "rising squeal", "clear piping",
)
SPOTS = (
    "a high perch", "deep cover", "an exposed snag", "the canopy",
    "a fence line", "thick brush", "an open ledge", "the understorey",
)
NESTSPOTS = (
    "tall reeds", "hollow trunks", "dense shrubs", "grass tussocks",
    "cliff crevices", "old burrows", "bramble tangles", "mossy banks",
)

_FILLER_POOLS = {
    "place": PLACES,
    "habitat": HABITATS,
    "food": FOODS,
    "sound": SOUNDS,
    "spot": SPOTS,
    "nestspot": NESTSPOTS,
    "place2": PLACES,
}

# Scaffold and filler nouns for the lexicon; colors stay out (adjectives).
DISTRACTOR_NOUNS = (
    "species", "song", "nests", "flocks", "spring", "autumn",
    "marshes", "lowlands", "deltas", "moors", "valleys", "foothills",
    "lagoons", "steppe", "fringes", "plateau", "meadows", "oases",
    "woodland", "scrub", "beds", "orchards", "forest", "hedgerows",
    "grassland", "thickets", "carr", "heathland",
    "seeds", "berries", "insects", "snails", "kernels", "grain",
    "spiders", "moths", "figs", "shoots", "larvae", "crustaceans",
    "whistle", "trill", "churr", "chink", "reel", "warble", "rattle",
    "purr", "squeal", "piping",
    "perch", "cover", "snag", "canopy", "fence", "line", "brush",
    "ledge", "understorey",
    "reeds", "trunks", "shrubs", "tussocks", "crevices", "burrows",
    "tangles", "banks",
)

_RNG_SIGNATURES, _RNG_DOCS, _RNG_CAPTIONS = range(3)


@dataclass(frozen=True)
class SynthConfig:
    n_classes: int = 20
    images_per_class: int = 30
    captions_per_image: int = 5
    attrs_per_class: int = 4
    visual_sentences: int = 6
    distractor_sentences: int = 6
    doc_synonym_rate: float = 0.5  # chance a document uses the expert color word
    seed: int = 7

    def __post_init__(self):
        if self.attrs_per_class > len(PARTS):
            raise ValueError(f"at most {len(PARTS)} attributes per class")
        if self.attrs_per_class < 1 or self.n_classes < 2:
            raise ValueError("need >= 1 attribute and >= 2 classes")
        if self.distractor_sentences > len(DISTRACTOR_TEMPLATES):
            raise ValueError(f"at most {len(DISTRACTOR_TEMPLATES)} distractor sentences")
        if not 0.0 <= self.doc_synonym_rate <= 1.0:
            raise ValueError("doc_synonym_rate must be in [0, 1]")


@dataclass(frozen=True)
class SynthData:
    corpus: Corpus
    caption_sets: list[CaptionSet]  # carry class_id for evaluation
    lexicon: NounLexicon
    signatures: dict[str, tuple[tuple[str, str], ...]]  # doc_id -> ((part, color), ...)


def _rng(seed: int, purpose: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, purpose]))


def _signatures(cfg: SynthConfig) -> list[tuple[tuple[str, str], ...]]:
    rng = _rng(cfg.seed, _RNG_SIGNATURES)
    out: list[tuple[tuple[str, str], ...]] = []
    seen = set()
    while len(out) < cfg.n_classes:
        parts = [PARTS[i] for i in rng.choice(len(PARTS), cfg.attrs_per_class, replace=False)]
        colors = [COLORS[i] for i in rng.integers(len(COLORS), size=cfg.attrs_per_class)]
        # Distinct token bags keep classes separable for bag-of-words models.
        bag = (tuple(sorted(parts)), tuple(sorted(colors)))
        if bag in seen:
            continue
        seen.add(bag)
        out.append(tuple(zip(parts, colors)))
    return out


def generate(cfg: SynthConfig = SynthConfig()) -> SynthData:
    signatures = _signatures(cfg)
    doc_rng = _rng(cfg.seed, _RNG_DOCS)
    cap_rng = _rng(cfg.seed, _RNG_CAPTIONS)

    documents = []
    caption_sets = []
    by_doc: dict[str, tuple[tuple[str, str], ...]] = {}
    for i, signature in enumerate(signatures):
        doc_id = f"sp{i:02d}"
        part0, color0 = signature[0]
        class_name = f"{color0}-{part0} bird {i:02d}"
        by_doc[doc_id] = signature

        sentences = []
        for s in range(cfg.visual_sentences):
            part, color = signature[s % len(signature)]
            if doc_rng.random() < cfg.doc_synonym_rate:
                color = COLOR_SYNONYMS[color]
            template = VISUAL_TEMPLATES[int(doc_rng.integers(len(VISUAL_TEMPLATES)))]
            sentences.append(template.format(c=color, p=part))
        picks = doc_rng.choice(
            len(DISTRACTOR_TEMPLATES), cfg.distractor_sentences, replace=False
        )
        for t in picks:
            template = DISTRACTOR_TEMPLATES[t]
            fillers = {
                name: pool[int(doc_rng.integers(len(pool)))]
                for name, pool in _FILLER_POOLS.items()
            }
            sentences.append(template.format(**fillers))
        documents.append(Document.from_sentences(doc_id, class_name, sentences))

        for j in range(cfg.images_per_class):
            captions = []
            for _ in range(cfg.captions_per_image):
                if len(signature) >= 2:
                    a, b = cap_rng.choice(len(signature), 2, replace=False)
                else:
                    a = b = 0
                (p1, c1), (p2, c2) = signature[a], signature[b]
                template = CAPTION_TEMPLATES[int(cap_rng.integers(len(CAPTION_TEMPLATES)))]
                captions.append(template.format(c1=c1, p1=p1, c2=c2, p2=p2))
            caption_sets.append(
                CaptionSet(f"{doc_id}-im{j:02d}", tuple(captions), class_id=doc_id)
            )

    lexicon = NounLexicon.from_words(("bird", "birds") + PARTS + DISTRACTOR_NOUNS)
    return SynthData(Corpus(documents), caption_sets, lexicon, by_doc)


def write_dataset(data: SynthData, outdir: str | Path) -> dict[str, Path]:
    """Write corpus.jsonl, captions.jsonl (labelled), and lexicon.txt."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "corpus": outdir / "corpus.jsonl",
        "captions": outdir / "captions.jsonl",
        "lexicon": outdir / "lexicon.txt",
    }
    save_corpus(data.corpus, paths["corpus"])
    save_captions(data.caption_sets, paths["captions"])
    with open(paths["lexicon"], "w", encoding="utf-8") as f:
        f.write("# synthetic noun lexicon\n")
        for word in sorted(data.lexicon.entries):
            f.write(word + "\n")
    return paths
