"""Deterministic text processing: sentence splitting, tokenization, n-grams, nouns.

Everything here is a pure function of its inputs; no model dependencies.
Nounhood is decided by a user-supplied lexicon (one lowercase word per line),
and sentence splitting is rule-based with an abbreviation guard.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

# Words that suppress a sentence break when they precede a period.
DEFAULT_ABBREVIATIONS = frozenset(
    {"approx", "e.g", "i.e", "cm", "in", "mm", "sp", "subsp"}
)

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)
_SENTENCE_END = re.compile(r"([.?!]+)(\s+)")
_WORD_BEFORE = re.compile(r"[\w.]+$")


def load_word_list(path: str | Path) -> frozenset[str]:
    """Load a word list file: UTF-8, one entry per line, '#' lines ignored."""
    entries = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        entries.add(line.lower())
    return frozenset(entries)


@dataclass(frozen=True)
class NounLexicon:
    """Immutable set of lowercase noun surface forms."""

    entries: frozenset[str]

    @classmethod
    def from_file(cls, path: str | Path) -> "NounLexicon":
        return cls(load_word_list(path))

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "NounLexicon":
        return cls(frozenset(w.lower() for w in words))

    def __contains__(self, word: str) -> bool:
        return word.lower() in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def split_sentences(
    text: str, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS
) -> list[str]:
    """Split text into trimmed sentences.

    A boundary is a run of ``.?!`` followed by whitespace and an uppercase
    letter or digit, unless the run is a single period preceded by a word in
    ``abbreviations``. Only whitespace is lost between input and output.
    """
    breaks: list[tuple[int, int]] = []  # (sentence end, next sentence start)
    for m in _SENTENCE_END.finditer(text):
        nxt = m.end()
        if nxt >= len(text):
            continue
        c = text[nxt]
        if not (c.isupper() or c.isdigit()):
            continue
        if m.group(1) == ".":
            before = _WORD_BEFORE.search(text, 0, m.start())
            if before and before.group().strip(".").lower() in abbreviations:
                continue
        breaks.append((m.end(1), nxt))

    sentences = []
    start = 0
    for end, nxt in breaks:
        sentences.append(text[start:end])
        start = nxt
    sentences.append(text[start:])
    return [s for s in (s.strip() for s in sentences) if s]


def tokenize(sentence: str) -> list[str]:
    """Lowercased maximal runs of letters or digits; punctuation discarded."""
    return _TOKEN.findall(sentence.lower())


def extract_nouns(tokens: Iterable[str], lexicon: NounLexicon) -> set[str]:
    """Deduplicated subset of tokens present in the lexicon."""
    return {t for t in tokens if t in lexicon}


def ngrams(tokens: list[str], n: int) -> list[str]:
    """All contiguous n-token joins (single-space separator), with multiplicity.

    Result length is ``max(0, len(tokens) - n + 1)``.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return [" ".join(tokens[i : i + n]) for i in range(len(tokens) - n + 1)]
