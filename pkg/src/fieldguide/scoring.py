"""Document scoring: per-document mean pair scores, probabilities, ranking.

A document's score for an image is the mean match score over every
(caption, document sentence) pair, the caption always in the first matcher
argument. Scores become a probability distribution via a softmax that by
default increases with the score; ``negate_scores`` reproduces the inverted
convention (probability decreasing with score) instead. Ties in the ranking
break by corpus order, so results are stable across runs.

Two modes: "fgsm" scores pairs with the trained matcher; "cosine" compares
raw store embeddings (no projection) by cosine similarity.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .corpus import CaptionSet, Corpus, Document, UnlabeledCaptions
from .embed import EmbeddingStore
from .errors import DataError
from . import matcher

PAIR_MODES = ("fgsm", "cosine")


@dataclass(frozen=True)
class DocScores:
    """Per-document scores for one image, in corpus order."""

    image_id: str
    z: np.ndarray
    probs: np.ndarray
    ranking: tuple[str, ...]


def _normalize_rows(m: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(m, axis=1, keepdims=True)
    return np.divide(m, norms, out=np.zeros_like(m), where=norms > 0)


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max()
    ez = np.exp(shifted)
    return ez / ez.sum()


def rank_scores(
    z: np.ndarray, doc_ids: Sequence[str], negate_scores: bool = False
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Softmax probabilities and a stable ranking from raw document scores.

    Probabilities increase with the score by default; ``negate_scores``
    inverts both the softmax and the ranking direction. Ties preserve the
    given (corpus) order.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (len(doc_ids),):
        raise DataError(f"scores have shape {z.shape}, expected ({len(doc_ids)},)")
    signed = -z if negate_scores else z
    probs = _softmax(signed)
    order = np.argsort(-signed, kind="stable")
    return probs, tuple(doc_ids[i] for i in order)


def score_document(
    caption_embeddings: Sequence[np.ndarray],
    sentence_embeddings: Sequence[np.ndarray],
    params: matcher.MatcherParams,
) -> float:
    """Mean positive score over all (caption, sentence) pairs, captions first."""
    if len(caption_embeddings) == 0 or len(sentence_embeddings) == 0:
        raise DataError("score_document needs non-empty caption and sentence lists")
    caps = np.asarray(caption_embeddings, dtype=np.float64)
    sents = np.asarray(sentence_embeddings, dtype=np.float64)
    pc = np.maximum(caps @ params.w_proj.T + params.b_proj, 0.0)
    ps = np.maximum(sents @ params.w_proj.T + params.b_proj, 0.0)
    return float(np.mean(_pair_scores(pc, ps, params)))


def _pair_scores(
    pc: np.ndarray, ps: np.ndarray, params: matcher.MatcherParams
) -> np.ndarray:
    """(captions, sentences) matrix of positive scores from projected inputs.

    The hidden pre-activation splits into a per-caption constant, a shared
    per-sentence block, and the pairwise |diff| block; only the last needs a
    matmul per pair, which keeps full-corpus scoring fast.
    """
    p = params.proj_dim
    w_cap = params.w_hidden[:, :p]
    w_sent = params.w_hidden[:, p : 2 * p]
    w_diff = params.w_hidden[:, 2 * p :]
    sent_part = ps @ w_sent.T + params.b_hidden  # (ns, q), shared
    out = np.empty((pc.shape[0], ps.shape[0]))
    for i in range(pc.shape[0]):
        v = sent_part + pc[i] @ w_cap.T + np.abs(pc[i] - ps) @ w_diff.T
        h = np.maximum(v, 0.0)
        logits = h @ params.w_out.T + params.b_out
        out[i] = matcher.positive_scores_batch(logits)
    return out


class ScoringContext:
    """Frozen corpus-side state for scoring many images against one corpus.

    Document sentence embeddings (and, in fgsm mode, their projections) are
    computed once; each image then costs one pass over its caption pairs.
    """

    def __init__(
        self,
        corpus: Corpus,
        doc_store: EmbeddingStore,
        params: matcher.MatcherParams | None = None,
        mode: str = "fgsm",
        negate_scores: bool = False,
    ):
        if mode not in PAIR_MODES:
            raise DataError(f"unknown scoring mode {mode!r}")
        if len(corpus) < 2:
            raise DataError("scoring needs a corpus with at least 2 documents")
        if mode == "fgsm":
            if params is None:
                raise DataError("fgsm mode needs matcher parameters")
            if params.embed_dim != doc_store.dim:
                raise DataError(
                    f"checkpoint embed dim {params.embed_dim} does not match "
                    f"store dim {doc_store.dim}"
                )
        self.corpus = corpus
        self.doc_store = doc_store
        self.params = params
        self.mode = mode
        self.negate_scores = negate_scores
        self.dim = doc_store.dim

        sent_keys = [k for k, _ in corpus.iter_sentences()]
        self._sents = doc_store.matrix(sent_keys)
        sizes = [len(d.sentences) for d in corpus.documents]
        self._doc_spans = np.cumsum([0] + sizes)
        self._doc_sizes = np.array(sizes, dtype=np.float64)
        if mode == "fgsm":
            self._doc_side = np.maximum(
                self._sents @ params.w_proj.T + params.b_proj, 0.0
            )
        else:
            self._doc_side = _normalize_rows(self._sents)

    def _score_matrix(self, cap_vecs: np.ndarray) -> np.ndarray:
        """(captions, all corpus sentences) pair score matrix."""
        if cap_vecs.ndim != 2 or cap_vecs.shape[1] != self.dim:
            raise DataError(
                f"caption matrix has shape {cap_vecs.shape}, expected (n, {self.dim})"
            )
        if self.mode == "fgsm":
            pc = np.maximum(cap_vecs @ self.params.w_proj.T + self.params.b_proj, 0.0)
            return _pair_scores(pc, self._doc_side, self.params)
        return _normalize_rows(cap_vecs) @ self._doc_side.T

    def score_vectors(self, image_id: str, cap_vecs: np.ndarray) -> DocScores:
        scores = self._score_matrix(np.asarray(cap_vecs, dtype=np.float64))
        col_sums = scores.sum(axis=0)
        per_doc = np.add.reduceat(col_sums, self._doc_spans[:-1])
        z = per_doc / (scores.shape[0] * self._doc_sizes)
        probs, ranking = rank_scores(z, self.corpus.doc_ids, self.negate_scores)
        return DocScores(image_id, z, probs, ranking)

    def score(
        self, caption_set: CaptionSet | UnlabeledCaptions, caption_store: EmbeddingStore
    ) -> DocScores:
        cap_vecs = caption_store.matrix(caption_set.caption_keys)
        return self.score_vectors(caption_set.image_id, cap_vecs)

    def evidence_vectors(
        self,
        captions: Sequence[str],
        cap_vecs: np.ndarray,
        document: Document,
        top_m: int,
    ) -> list[tuple[str, str, float]]:
        """Top scoring (caption, sentence, score) triples for one document,
        sorted descending; ties break in caption-major order."""
        if top_m < 1:
            raise DataError("top_m must be >= 1")
        cap_vecs = np.asarray(cap_vecs, dtype=np.float64)
        if cap_vecs.ndim != 2 or cap_vecs.shape[1] != self.dim:
            raise DataError(
                f"caption matrix has shape {cap_vecs.shape}, expected (n, {self.dim})"
            )
        doc_idx = self.corpus.doc_ids.index(document.doc_id)
        lo, hi = self._doc_spans[doc_idx], self._doc_spans[doc_idx + 1]
        if self.mode == "fgsm":
            pc = np.maximum(cap_vecs @ self.params.w_proj.T + self.params.b_proj, 0.0)
            block = _pair_scores(pc, self._doc_side[lo:hi], self.params)
        else:
            block = _normalize_rows(cap_vecs) @ self._doc_side[lo:hi].T
        flat = block.ravel()
        top = np.argsort(-flat, kind="stable")[:top_m]
        ns = hi - lo
        return [
            (captions[i // ns], document.sentences[i % ns], float(flat[i]))
            for i in top
        ]


def score_corpus(
    caption_set: CaptionSet | UnlabeledCaptions,
    corpus: Corpus,
    caption_store: EmbeddingStore,
    doc_store: EmbeddingStore,
    params: matcher.MatcherParams | None = None,
    mode: str = "fgsm",
    negate_scores: bool = False,
) -> DocScores:
    """One-shot corpus scoring for a single image; see :class:`ScoringContext`."""
    ctx = ScoringContext(corpus, doc_store, params, mode, negate_scores)
    return ctx.score(caption_set, caption_store)


def evidence(
    caption_set: CaptionSet | UnlabeledCaptions,
    document: Document,
    caption_store: EmbeddingStore,
    doc_store: EmbeddingStore,
    params: matcher.MatcherParams | None = None,
    top_m: int = 3,
    mode: str = "fgsm",
) -> list[tuple[str, str, float]]:
    """Top (caption, sentence, score) pairs explaining one document's score,
    sorted descending; ties break in caption-major order."""
    if top_m < 1:
        raise DataError("top_m must be >= 1")
    if mode not in PAIR_MODES:
        raise DataError(f"unknown scoring mode {mode!r}")
    cap_vecs = caption_store.matrix(caption_set.caption_keys)
    sent_vecs = doc_store.matrix(document.sentence_keys)
    if mode == "fgsm":
        if params is None:
            raise DataError("fgsm mode needs matcher parameters")
        pc = np.maximum(cap_vecs @ params.w_proj.T + params.b_proj, 0.0)
        ps = np.maximum(sent_vecs @ params.w_proj.T + params.b_proj, 0.0)
        block = _pair_scores(pc, ps, params)
    else:
        block = _normalize_rows(cap_vecs) @ _normalize_rows(sent_vecs).T
    flat = block.ravel()
    top = np.argsort(-flat, kind="stable")[:top_m]
    ns = len(document.sentences)
    return [
        (caption_set.captions[i // ns], document.sentences[i % ns], float(flat[i]))
        for i in top
    ]


def write_scores(
    results: Iterable[DocScores], path: str | Path, method: str | None = None
) -> None:
    """Line-delimited scores dump: image_id, ranking, z, probs (+ method)."""
    with open(path, "w", encoding="utf-8") as f:
        for r in results:
            record: dict = {
                "image_id": r.image_id,
                "ranking": list(r.ranking),
                "z": [float(v) for v in r.z],
                "probs": [float(v) for v in r.probs],
            }
            if method is not None:
                record["method"] = method
            f.write(json.dumps(record) + "\n")


def read_scores(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                record["image_id"], record["ranking"]
            except (json.JSONDecodeError, KeyError) as e:
                raise DataError(f"{path}:{lineno}: bad scores record: {e}") from None
            records.append(record)
    return records
