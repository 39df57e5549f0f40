"""HTTP identification service.

Serves a frozen model snapshot: POST /api/identify scores free-text
descriptions against the corpus in any of the four modes and returns ranked
documents with per-sentence evidence; document and health endpoints support
the browser client, which is served as static files from /.

The snapshot (corpus, stores, matcher weights, baseline indices) is
immutable; handlers read it from app state once per request, so a reload
can swap it atomically between requests.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from . import baselines, matcher, scoring
from .corpus import Corpus, load_corpus
from .embed import EmbeddingProvider, EmbeddingStore, HashedBowConfig, HashedBowProvider, load_store
from .errors import DataError

logger = logging.getLogger(__name__)

MODES = ("fgsm", "cosine", "tfidf", "bm25")

MAX_CAPTIONS = 16
MAX_CAPTION_CHARS = 512


class IdentifyRequest(BaseModel):
    captions: list[str] = Field(min_length=1, max_length=MAX_CAPTIONS)
    top_k: int = Field(default=5, ge=1)
    mode: Literal["fgsm", "cosine", "tfidf", "bm25"] | None = None


class EvidenceItem(BaseModel):
    caption: str
    sentence: str
    score: float


class IdentifyResult(BaseModel):
    doc_id: str
    class_name: str
    z: float
    probability: float
    evidence: list[EvidenceItem]


class ModelInfo(BaseModel):
    mode: str
    corpus_id: str
    K: int


class IdentifyResponse(BaseModel):
    results: list[IdentifyResult]
    model_info: ModelInfo


@dataclass
class ModelSnapshot:
    """Read-only bundle of everything needed to answer identify requests."""

    corpus: Corpus
    doc_store: EmbeddingStore
    provider: EmbeddingProvider
    mode: str = "fgsm"
    params: matcher.MatcherParams | None = None
    negate_scores: bool = False
    corpus_id: str = ""
    fgsm_ctx: scoring.ScoringContext | None = field(default=None, repr=False)
    cosine_ctx: scoring.ScoringContext | None = field(default=None, repr=False)
    tfidf_index: baselines.TfidfIndex | None = field(default=None, repr=False)
    bm25_index: baselines.Bm25Index | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise DataError(f"unknown mode {self.mode!r}")
        if self.provider.dim != self.doc_store.dim:
            raise DataError(
                f"provider dim {self.provider.dim} does not match "
                f"document store dim {self.doc_store.dim}"
            )
        if not self.corpus_id:
            self.corpus_id = self.corpus.content_id()
        if self.params is not None:
            self.fgsm_ctx = scoring.ScoringContext(
                self.corpus, self.doc_store, self.params, "fgsm", self.negate_scores
            )
        elif self.mode == "fgsm":
            raise DataError("fgsm mode needs a checkpoint")
        self.cosine_ctx = scoring.ScoringContext(
            self.corpus, self.doc_store, None, "cosine", self.negate_scores
        )
        self.tfidf_index = baselines.build_tfidf(self.corpus)
        self.bm25_index = baselines.build_bm25(self.corpus)

    def identify(self, captions: list[str], top_k: int, mode: str | None) -> IdentifyResponse:
        mode = mode or self.mode
        if mode == "fgsm" and self.fgsm_ctx is None:
            raise DataError("this server has no checkpoint loaded; fgsm mode unavailable")
        cap_vecs = np.array(
            [self.provider.embed(c) for c in captions], dtype=np.float64
        ).reshape(len(captions), self.doc_store.dim)

        if mode in ("fgsm", "cosine"):
            ctx = self.fgsm_ctx if mode == "fgsm" else self.cosine_ctx
            doc_scores = ctx.score_vectors("request", cap_vecs)
            z, probs, ranking = doc_scores.z, doc_scores.probs, doc_scores.ranking
        else:
            index_rank = baselines.tfidf_rank if mode == "tfidf" else baselines.bm25_rank
            index = self.tfidf_index if mode == "tfidf" else self.bm25_index
            by_id = dict(index_rank(index, captions))
            z = np.array([by_id[d] for d in self.corpus.doc_ids])
            probs, ranking = scoring.rank_scores(z, self.corpus.doc_ids, self.negate_scores)

        # Evidence pairs come from the matcher when it ranked, and from raw
        # embedding similarity otherwise (bag-of-words scores do not decompose
        # into caption-sentence pairs).
        evidence_ctx = self.fgsm_ctx if mode == "fgsm" else self.cosine_ctx
        top_k = min(top_k, len(self.corpus))
        results = []
        by_doc = {d: i for i, d in enumerate(self.corpus.doc_ids)}
        for doc_id in ranking[:top_k]:
            doc = self.corpus.get(doc_id)
            triples = evidence_ctx.evidence_vectors(captions, cap_vecs, doc, top_m=3)
            i = by_doc[doc_id]
            results.append(
                IdentifyResult(
                    doc_id=doc_id,
                    class_name=doc.class_name,
                    z=float(z[i]),
                    probability=float(probs[i]),
                    evidence=[
                        EvidenceItem(caption=c, sentence=s, score=v) for c, s, v in triples
                    ],
                )
            )
        return IdentifyResponse(
            results=results,
            model_info=ModelInfo(mode=mode, corpus_id=self.corpus_id, K=len(self.corpus)),
        )


def load_snapshot(
    corpus_path: str | Path,
    store_path: str | Path,
    checkpoint_path: str | Path | None = None,
    mode: str = "fgsm",
    provider: EmbeddingProvider | None = None,
    negate_scores: bool = False,
) -> ModelSnapshot:
    corpus = load_corpus(corpus_path)
    doc_store = load_store(store_path)
    params = None
    if checkpoint_path is not None:
        params = matcher.load_checkpoint(checkpoint_path)
        if params.embed_dim != doc_store.dim:
            raise DataError(
                f"checkpoint embed dim {params.embed_dim} does not match "
                f"store dim {doc_store.dim}"
            )
    if provider is None:
        provider = HashedBowProvider(HashedBowConfig(dim=doc_store.dim))
    return ModelSnapshot(
        corpus, doc_store, provider, mode, params, negate_scores=negate_scores
    )


def build_app(
    snapshot: ModelSnapshot | None = None,
    static_dir: str | Path | None = None,
    session_log: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="fieldguide identification service")
    app.state.snapshot = snapshot
    app.state.session_log = str(session_log) if session_log else None

    def current() -> ModelSnapshot:
        snap = app.state.snapshot
        if snap is None:
            raise HTTPException(status_code=503, detail="model is still loading")
        return snap

    @app.post("/api/identify", response_model=IdentifyResponse)
    def identify(req: IdentifyRequest) -> IdentifyResponse:
        snap = current()
        captions = [c.strip() for c in req.captions]
        if any(not c for c in captions):
            raise HTTPException(status_code=400, detail="captions must be non-empty")
        if any(len(c) > MAX_CAPTION_CHARS for c in captions):
            raise HTTPException(
                status_code=400,
                detail=f"captions are limited to {MAX_CAPTION_CHARS} characters",
            )
        if req.mode is not None and req.mode not in MODES:
            raise HTTPException(status_code=400, detail=f"unknown mode {req.mode!r}")
        try:
            response = snap.identify(captions, req.top_k, req.mode)
        except DataError as e:
            raise HTTPException(status_code=400, detail=str(e)) from None
        if app.state.session_log:
            record = {
                "ts": time.time(),
                "n_captions": len(captions),
                "captions": captions,
                "mode": response.model_info.mode,
                "top": [r.doc_id for r in response.results[:3]],
            }
            with open(app.state.session_log, "a", encoding="utf-8") as f:
                f.write(json.dumps(record) + "\n")
        return response

    @app.get("/api/documents")
    def list_documents() -> list[dict]:
        snap = current()
        return [
            {"doc_id": d.doc_id, "class_name": d.class_name} for d in snap.corpus
        ]

    @app.get("/api/documents/{doc_id}")
    def get_document(doc_id: str) -> dict:
        snap = current()
        if doc_id not in snap.corpus:
            raise HTTPException(status_code=404, detail=f"unknown document {doc_id!r}")
        doc = snap.corpus.get(doc_id)
        return {
            "doc_id": doc.doc_id,
            "class_name": doc.class_name,
            "sentences": list(doc.sentences),
        }

    @app.get("/api/health")
    def health() -> dict:
        snap = app.state.snapshot
        if snap is None:
            return {"status": "loading", "corpus_id": None, "K": 0, "mode": None}
        return {
            "status": "ready",
            "corpus_id": snap.corpus_id,
            "K": len(snap.corpus),
            "mode": snap.mode,
        }

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    else:
        if static_dir is not None:
            logger.warning("static dir %s not found; serving API only", static_dir)

        @app.get("/")
        def root() -> dict:
            return {"service": "fieldguide", "ui": "not built", "api": "/api/identify"}

    return app
