"""Unsupervised ranking baselines: TF-IDF with n-grams, and BM25 Okapi.

Captions are concatenated into one bag per image by default; per-caption
scoring with mean aggregation is available for comparison. N-grams never
cross sentence or caption boundaries. Both rankers are deterministic and
break score ties by corpus order.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .corpus import Corpus
from .errors import DataError
from .text import ngrams, tokenize

AGGREGATES = ("concat", "mean")


def _ngram_counts(texts: Sequence[str], sizes: Sequence[int]) -> Counter:
    counts: Counter = Counter()
    for text in texts:
        tokens = tokenize(text)
        for n in sizes:
            counts.update(ngrams(tokens, n))
    return counts


@dataclass(frozen=True)
class TfidfIndex:
    doc_ids: tuple[str, ...]
    idf: dict[str, float]
    doc_vectors: tuple[dict[str, float], ...]  # L2-normalized tf-idf weights
    ngram_sizes: tuple[int, ...]


def build_tfidf(corpus: Corpus, ngram_sizes: Sequence[int] = (2, 3)) -> TfidfIndex:
    """Smoothed idf = ln((1+N)/(1+df)) + 1; weights tf*idf, L2-normalized."""
    if len(corpus) == 0:
        raise DataError("cannot index an empty corpus")
    sizes = tuple(sorted(set(ngram_sizes)))
    if not sizes or sizes[0] < 1:
        raise DataError(f"invalid ngram sizes {ngram_sizes}")
    doc_counts = [_ngram_counts(doc.sentences, sizes) for doc in corpus.documents]
    df: Counter = Counter()
    for counts in doc_counts:
        df.update(counts.keys())
    n_docs = len(corpus)
    idf = {t: math.log((1 + n_docs) / (1 + d)) + 1.0 for t, d in df.items()}
    vectors = []
    for counts in doc_counts:
        weights = {t: c * idf[t] for t, c in counts.items()}
        norm = math.sqrt(sum(w * w for w in weights.values()))
        if norm > 0:
            weights = {t: w / norm for t, w in weights.items()}
        vectors.append(weights)
    return TfidfIndex(corpus.doc_ids, idf, tuple(vectors), sizes)


def _tfidf_query_vector(index: TfidfIndex, texts: Sequence[str]) -> dict[str, float]:
    counts = _ngram_counts(texts, index.ngram_sizes)
    weights = {t: c * index.idf[t] for t, c in counts.items() if t in index.idf}
    norm = math.sqrt(sum(w * w for w in weights.values()))
    if norm > 0:
        weights = {t: w / norm for t, w in weights.items()}
    return weights


def _rank(doc_ids: Sequence[str], scores: Sequence[float]) -> list[tuple[str, float]]:
    order = sorted(range(len(doc_ids)), key=lambda i: (-scores[i], i))
    return [(doc_ids[i], scores[i]) for i in order]


def tfidf_rank(
    index: TfidfIndex, captions: Sequence[str], aggregate: str = "concat"
) -> list[tuple[str, float]]:
    """Cosine similarity ranking; out-of-vocabulary queries score 0 everywhere."""
    if aggregate not in AGGREGATES:
        raise DataError(f"unknown aggregate {aggregate!r}")
    if aggregate == "concat":
        query = _tfidf_query_vector(index, captions)
        scores = [
            sum(w * vec.get(t, 0.0) for t, w in query.items())
            for vec in index.doc_vectors
        ]
    else:
        per_caption = [_tfidf_query_vector(index, [c]) for c in captions]
        scores = [
            sum(
                sum(w * vec.get(t, 0.0) for t, w in q.items())
                for q in per_caption
            )
            / len(per_caption)
            for vec in index.doc_vectors
        ]
    return _rank(index.doc_ids, scores)


@dataclass(frozen=True)
class Bm25Index:
    doc_ids: tuple[str, ...]
    term_freqs: tuple[Counter, ...]  # unigram counts per document
    doc_lens: tuple[int, ...]
    avgdl: float
    idf: dict[str, float]
    k1: float = 1.5
    b: float = 0.75
    epsilon: float = 0.25


def build_bm25(
    corpus: Corpus, k1: float = 1.5, b: float = 0.75, epsilon: float = 0.25
) -> Bm25Index:
    """Okapi BM25 with idf = ln((N - df + 0.5)/(df + 0.5)); negative idf values
    are floored at epsilon times the mean positive idf (epsilon itself when no
    term has positive idf, e.g. a single-document corpus)."""
    if len(corpus) == 0:
        raise DataError("cannot index an empty corpus")
    if k1 <= 0 or not 0 <= b <= 1:
        raise DataError(f"invalid BM25 parameters k1={k1} b={b}")
    term_freqs = []
    for doc in corpus.documents:
        counts: Counter = Counter()
        for sentence in doc.sentences:
            counts.update(tokenize(sentence))
        term_freqs.append(counts)
    doc_lens = tuple(sum(tf.values()) for tf in term_freqs)
    avgdl = sum(doc_lens) / len(doc_lens)
    df: Counter = Counter()
    for tf in term_freqs:
        df.update(tf.keys())
    n_docs = len(corpus)
    idf = {t: math.log((n_docs - d + 0.5) / (d + 0.5)) for t, d in df.items()}
    positive = [v for v in idf.values() if v > 0]
    floor = epsilon * (sum(positive) / len(positive)) if positive else epsilon
    idf = {t: v if v > 0 else floor for t, v in idf.items()}
    return Bm25Index(
        corpus.doc_ids, tuple(term_freqs), doc_lens, avgdl, idf, k1, b, epsilon
    )


def _bm25_scores(index: Bm25Index, terms: Sequence[str]) -> list[float]:
    scores = []
    for tf, dl in zip(index.term_freqs, index.doc_lens):
        norm = index.k1 * (1.0 - index.b + index.b * dl / index.avgdl)
        s = 0.0
        for t in terms:  # query terms count with multiplicity
            f = tf.get(t, 0)
            if f:
                s += index.idf[t] * f * (index.k1 + 1.0) / (f + norm)
        scores.append(s)
    return scores


def bm25_rank(
    index: Bm25Index, captions: Sequence[str], aggregate: str = "concat"
) -> list[tuple[str, float]]:
    if aggregate not in AGGREGATES:
        raise DataError(f"unknown aggregate {aggregate!r}")
    if aggregate == "concat":
        terms = [t for c in captions for t in tokenize(c)]
        scores = _bm25_scores(index, terms)
    else:
        per_caption = [_bm25_scores(index, tokenize(c)) for c in captions]
        scores = [sum(col) / len(per_caption) for col in zip(*per_caption)]
    return _rank(index.doc_ids, scores)
