"""Trainable sentence-pair matcher.

Two small MLPs: a projection applied independently to each sentence
embedding, and a classifier head applied to the concatenation
``[proj1; proj2; |proj1 - proj2|]``. The head is either binary (one
logistic output: match vs mismatch) or 3-class (positive / neutral /
negative) with softmax cross entropy.

Training is two-phase: phase 1 minimizes the pair loss alone; phase 2 adds
a batch-level distribution regularizer computed on per-step image batches,
pushing each image's document distribution toward one-hot and different
images' distributions toward orthogonality. All gradients are hand-written
backpropagation in float64, verified against central finite differences.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .corpus import Corpus, UnlabeledCaptions
from .embed import EmbeddingStore
from .errors import DataError, NumericError

CHECKPOINT_MAGIC = b"CLEVFGSM"
CHECKPOINT_VERSION = 1

# Class index layout for the 3-class head; the positive class drives scoring.
CLASS3_INDEX = {"positive": 0, "neutral": 1, "negative": 2}
BINARY_TARGET = {"positive": 1.0, "negative": 0.0}
POSITIVE_CLASS = 0

_PARAM_FIELDS = ("w_proj", "b_proj", "w_hidden", "b_hidden", "w_out", "b_out")

# RNG purpose tags for stream derivation from one training seed.
_RNG_INIT, _RNG_SHUFFLE, _RNG_REG = range(3)


@dataclass
class MatcherParams:
    """Weights of the projection and classifier MLPs (float64)."""

    w_proj: np.ndarray  # (proj_dim, embed_dim)
    b_proj: np.ndarray  # (proj_dim,)
    w_hidden: np.ndarray  # (hidden_dim, 3 * proj_dim)
    b_hidden: np.ndarray  # (hidden_dim,)
    w_out: np.ndarray  # (n_classes, hidden_dim)
    b_out: np.ndarray  # (n_classes,)

    @property
    def embed_dim(self) -> int:
        return self.w_proj.shape[1]

    @property
    def proj_dim(self) -> int:
        return self.w_proj.shape[0]

    @property
    def hidden_dim(self) -> int:
        return self.w_hidden.shape[0]

    @property
    def n_classes(self) -> int:
        return self.w_out.shape[0]

    def validate(self) -> None:
        p, d, q, c = self.proj_dim, self.embed_dim, self.hidden_dim, self.n_classes
        expected = {
            "w_proj": (p, d), "b_proj": (p,),
            "w_hidden": (q, 3 * p), "b_hidden": (q,),
            "w_out": (c, q), "b_out": (c,),
        }
        if c not in (1, 3):
            raise DataError(f"n_classes must be 1 or 3, got {c}")
        for name, shape in expected.items():
            arr = getattr(self, name)
            if arr.shape != shape:
                raise DataError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise DataError(f"{name} contains non-finite entries")

    def copy(self) -> "MatcherParams":
        return MatcherParams(*(getattr(self, f).copy() for f in _PARAM_FIELDS))


def zeros_like_params(params: MatcherParams) -> MatcherParams:
    return MatcherParams(*(np.zeros_like(getattr(params, f)) for f in _PARAM_FIELDS))


def init_params(
    embed_dim: int,
    proj_dim: int = 128,
    hidden_dim: int = 128,
    n_classes: int = 3,
    seed: int = 42,
) -> MatcherParams:
    """He-initialized weights, zero biases."""
    if n_classes not in (1, 3):
        raise DataError(f"n_classes must be 1 or 3, got {n_classes}")
    rng = np.random.default_rng(np.random.SeedSequence([seed, _RNG_INIT]))
    w_proj = rng.normal(0.0, np.sqrt(2.0 / embed_dim), size=(proj_dim, embed_dim))
    w_hidden = rng.normal(0.0, np.sqrt(2.0 / (3 * proj_dim)), size=(hidden_dim, 3 * proj_dim))
    w_out = rng.normal(0.0, np.sqrt(1.0 / hidden_dim), size=(n_classes, hidden_dim))
    return MatcherParams(
        w_proj, np.zeros(proj_dim),
        w_hidden, np.zeros(hidden_dim),
        w_out, np.zeros(n_classes),
    )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 5  # phase 1 (pair loss only)
    reg_epochs: int = 1  # phase 2 (pair loss + weighted regularizer)
    reg_weight: float = 1.0
    seed: int = 42
    classes: int = 3  # 2 -> binary logistic head, 3 -> softmax head
    proj_dim: int = 128
    hidden_dim: int = 128
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    reg_image_batch: int = 16
    reg_doc_sample: int | None = None  # None = full corpus per step

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("learning_rate, batch_size, epochs must be positive")
        if self.reg_weight < 0:
            raise ValueError("reg_weight must be >= 0")
        if self.classes not in (2, 3):
            raise ValueError(f"classes must be 2 or 3, got {self.classes}")
        if self.reg_image_batch < 1:
            raise ValueError("reg_image_batch must be >= 1")

    @property
    def n_classes(self) -> int:
        return 1 if self.classes == 2 else 3


# ---------------------------------------------------------------------------
# Forward / backward core (batched, float64)
# ---------------------------------------------------------------------------


@dataclass
class _Cache:
    e1: np.ndarray
    e2: np.ndarray
    a1: np.ndarray
    a2: np.ndarray
    p1: np.ndarray
    p2: np.ndarray
    diff: np.ndarray
    u: np.ndarray
    v: np.ndarray
    h: np.ndarray


def _forward_batch(e1: np.ndarray, e2: np.ndarray, params: MatcherParams):
    a1 = e1 @ params.w_proj.T + params.b_proj
    p1 = np.maximum(a1, 0.0)
    a2 = e2 @ params.w_proj.T + params.b_proj
    p2 = np.maximum(a2, 0.0)
    diff = p1 - p2
    u = np.concatenate([p1, p2, np.abs(diff)], axis=1)
    v = u @ params.w_hidden.T + params.b_hidden
    h = np.maximum(v, 0.0)
    logits = h @ params.w_out.T + params.b_out
    return logits, _Cache(e1, e2, a1, a2, p1, p2, diff, u, v, h)


def _backward_batch(cache: _Cache, dlogits: np.ndarray, params: MatcherParams) -> MatcherParams:
    p = params.proj_dim
    dw_out = dlogits.T @ cache.h
    db_out = dlogits.sum(axis=0)
    dh = dlogits @ params.w_out
    dv = np.where(cache.v > 0.0, dh, 0.0)
    dw_hidden = dv.T @ cache.u
    db_hidden = dv.sum(axis=0)
    du = dv @ params.w_hidden
    s = np.sign(cache.diff)
    dp1 = du[:, :p] + du[:, 2 * p :] * s
    dp2 = du[:, p : 2 * p] - du[:, 2 * p :] * s
    da1 = np.where(cache.a1 > 0.0, dp1, 0.0)
    da2 = np.where(cache.a2 > 0.0, dp2, 0.0)
    dw_proj = da1.T @ cache.e1 + da2.T @ cache.e2
    db_proj = da1.sum(axis=0) + da2.sum(axis=0)
    return MatcherParams(dw_proj, db_proj, dw_hidden, db_hidden, dw_out, db_out)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


# ---------------------------------------------------------------------------
# Public single-pair operations
# ---------------------------------------------------------------------------


def project(e: np.ndarray, params: MatcherParams) -> np.ndarray:
    """ReLU projection of one sentence embedding."""
    e = np.asarray(e, dtype=np.float64)
    if e.shape != (params.embed_dim,):
        raise DataError(f"embedding has shape {e.shape}, expected ({params.embed_dim},)")
    return np.maximum(params.w_proj @ e + params.b_proj, 0.0)


def pair_logits(e1: np.ndarray, e2: np.ndarray, params: MatcherParams) -> np.ndarray:
    """Classifier logits for one (first, second) sentence pair."""
    e1 = np.asarray(e1, dtype=np.float64)
    e2 = np.asarray(e2, dtype=np.float64)
    if e1.shape != (params.embed_dim,) or e2.shape != (params.embed_dim,):
        raise DataError(
            f"pair has shapes {e1.shape}/{e2.shape}, expected ({params.embed_dim},)"
        )
    logits, _ = _forward_batch(e1[None, :], e2[None, :], params)
    return logits[0]


def positive_score(logits: np.ndarray) -> float:
    """Scalar match score in (0, 1): logistic output, or the softmax
    probability of the positive class for the 3-class head."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.shape == (1,):
        return float(_sigmoid(logits)[0])
    if logits.shape == (3,):
        return float(np.exp(_log_softmax(logits[None, :]))[0, POSITIVE_CLASS])
    raise DataError(f"logits must have length 1 or 3, got shape {logits.shape}")


def positive_scores_batch(logits: np.ndarray) -> np.ndarray:
    """Vectorized :func:`positive_score` over rows of logits."""
    if logits.shape[1] == 1:
        return _sigmoid(logits[:, 0])
    return np.exp(_log_softmax(logits))[:, POSITIVE_CLASS]


# ---------------------------------------------------------------------------
# Pair loss
# ---------------------------------------------------------------------------


def _encode_labels(labels: Sequence[str], n_classes: int) -> np.ndarray:
    if n_classes == 1:
        try:
            return np.array([BINARY_TARGET[l] for l in labels], dtype=np.float64)
        except KeyError as e:
            raise DataError(f"label {e} is invalid for the binary head") from None
    try:
        return np.array([CLASS3_INDEX[l] for l in labels], dtype=np.intp)
    except KeyError as e:
        raise DataError(f"unknown pair label {e}") from None


def _pair_loss_grads(
    e1: np.ndarray, e2: np.ndarray, y: np.ndarray, params: MatcherParams
) -> tuple[float, MatcherParams]:
    """Mean cross-entropy over the batch and gradients for every parameter."""
    n = e1.shape[0]
    logits, cache = _forward_batch(e1, e2, params)
    if params.n_classes == 1:
        raw = logits[:, 0]
        loss = float(np.mean(np.logaddexp(0.0, raw) - y * raw))
        dlogits = ((_sigmoid(raw) - y) / n)[:, None]
    else:
        logp = _log_softmax(logits)
        loss = float(-np.mean(logp[np.arange(n), y]))
        dlogits = np.exp(logp)
        dlogits[np.arange(n), y] -= 1.0
        dlogits /= n
    return loss, _backward_batch(cache, dlogits, params)


def loss_pairs(
    batch: Sequence[tuple[np.ndarray, np.ndarray, str]], params: MatcherParams
) -> tuple[float, MatcherParams]:
    """Mean cross-entropy of labelled embedding pairs, with gradients."""
    if not batch:
        raise DataError("empty pair batch")
    e1 = np.array([np.asarray(b[0], dtype=np.float64) for b in batch])
    e2 = np.array([np.asarray(b[1], dtype=np.float64) for b in batch])
    y = _encode_labels([b[2] for b in batch], params.n_classes)
    return _pair_loss_grads(e1, e2, y, params)


# ---------------------------------------------------------------------------
# Batch distribution regularizer
# ---------------------------------------------------------------------------


def regularizer(
    batch_probs: np.ndarray, validate: bool = True
) -> tuple[float, np.ndarray]:
    """Batch-level distribution regularizer and its gradient.

    For rows p_x of ``batch_probs``:
    ``R = sum_x ( -<p_x, p_x> + sum_{x' != x} <p_x, p_x'> )``,
    with gradient ``dR/dp_x = -2 p_x + 2 sum_{x' != x} p_x'``. One-hot,
    pairwise-orthogonal rows minimize R at exactly ``-len(batch_probs)``.
    """
    probs = np.asarray(batch_probs, dtype=np.float64)
    if probs.ndim != 2:
        raise DataError(f"batch_probs must be 2-D, got shape {probs.shape}")
    if validate:
        if np.any(probs < -1e-12):
            raise DataError("probability vectors must be nonnegative")
        sums = probs.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-9):
            raise DataError("probability vectors must sum to 1 within 1e-9")
    gram = probs @ probs.T
    value = float(gram.sum() - 2.0 * np.trace(gram))
    totals = probs.sum(axis=0)
    grads = 2.0 * totals[None, :] - 4.0 * probs
    return value, grads


def _softmax_rows(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    ez = np.exp(shifted)
    return ez / ez.sum(axis=1, keepdims=True)


def _mean_pool_matrix(group_sizes: Sequence[int]) -> np.ndarray:
    """(groups, total) matrix averaging consecutive blocks of the given sizes."""
    out = np.zeros((len(group_sizes), int(sum(group_sizes))))
    start = 0
    for g, size in enumerate(group_sizes):
        out[g, start : start + size] = 1.0 / size
        start += size
    return out


def _reg_step(
    params: MatcherParams,
    cap_embeds: np.ndarray,
    caps_per_image: Sequence[int],
    sent_embeds: np.ndarray,
    sents_per_doc: Sequence[int],
) -> tuple[float, MatcherParams]:
    """Regularizer value and parameter gradients for one image batch.

    Every (caption, document sentence) pair is scored; per-document means
    give each image a score vector over the corpus, softmax turns scores
    into a distribution, and the regularizer is applied to the batch of
    distributions. Gradients flow back through the softmax, the mean, and
    both MLPs. Returns the unweighted regularizer value.
    """
    nc, ns, p = cap_embeds.shape[0], sent_embeds.shape[0], params.proj_dim

    ac = cap_embeds @ params.w_proj.T + params.b_proj
    pc = np.maximum(ac, 0.0)
    asn = sent_embeds @ params.w_proj.T + params.b_proj
    ps = np.maximum(asn, 0.0)

    # Caption-major pair grid: row (i * ns + j) pairs caption i with sentence j.
    i_idx = np.repeat(np.arange(nc), ns)
    j_idx = np.tile(np.arange(ns), nc)
    p1, p2 = pc[i_idx], ps[j_idx]
    diff = p1 - p2
    u = np.concatenate([p1, p2, np.abs(diff)], axis=1)
    v = u @ params.w_hidden.T + params.b_hidden
    h = np.maximum(v, 0.0)
    logits = h @ params.w_out.T + params.b_out
    scores = positive_scores_batch(logits)

    m_img = _mean_pool_matrix(caps_per_image)
    m_doc = _mean_pool_matrix(sents_per_doc)
    score_grid = scores.reshape(nc, ns)
    z = m_img @ score_grid @ m_doc.T
    probs = _softmax_rows(z)

    value, dprobs = regularizer(probs, validate=False)
    dz = probs * (dprobs - (dprobs * probs).sum(axis=1, keepdims=True))
    dscores = (m_img.T @ dz @ m_doc).ravel()

    if params.n_classes == 1:
        dlogits = (dscores * scores * (1.0 - scores))[:, None]
    else:
        soft = np.exp(_log_softmax(logits))
        onehot = np.zeros_like(soft)
        onehot[:, POSITIVE_CLASS] = 1.0
        dlogits = (dscores * scores)[:, None] * (onehot - soft)

    dw_out = dlogits.T @ h
    db_out = dlogits.sum(axis=0)
    dh = dlogits @ params.w_out
    dv = np.where(v > 0.0, dh, 0.0)
    dw_hidden = dv.T @ u
    db_hidden = dv.sum(axis=0)
    du = dv @ params.w_hidden
    s = np.sign(diff)
    dp1 = du[:, :p] + du[:, 2 * p :] * s
    dp2 = du[:, p : 2 * p] - du[:, 2 * p :] * s
    # The grid ordering makes per-caption rows contiguous and per-sentence
    # rows strided, so both scatters reduce to reshaped sums.
    dpc = dp1.reshape(nc, ns, p).sum(axis=1)
    dps = dp2.reshape(nc, ns, p).sum(axis=0)
    dac = np.where(ac > 0.0, dpc, 0.0)
    das = np.where(asn > 0.0, dps, 0.0)
    dw_proj = dac.T @ cap_embeds + das.T @ sent_embeds
    db_proj = dac.sum(axis=0) + das.sum(axis=0)
    grads = MatcherParams(dw_proj, db_proj, dw_hidden, db_hidden, dw_out, db_out)
    return value, grads


# ---------------------------------------------------------------------------
# Optimizer and training loop
# ---------------------------------------------------------------------------


class _Adam:
    def __init__(self, params: MatcherParams, cfg: TrainConfig):
        self.m = zeros_like_params(params)
        self.v = zeros_like_params(params)
        self.t = 0
        self.cfg = cfg

    def update(self, params: MatcherParams, grads: MatcherParams) -> None:
        cfg = self.cfg
        self.t += 1
        bc1 = 1.0 - cfg.beta1**self.t
        bc2 = 1.0 - cfg.beta2**self.t
        for name in _PARAM_FIELDS:
            g = getattr(grads, name)
            m = getattr(self.m, name)
            v = getattr(self.v, name)
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            step = cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.adam_eps)
            getattr(params, name)[...] -= step


def _add_grads(target: MatcherParams, other: MatcherParams, scale: float) -> None:
    for name in _PARAM_FIELDS:
        getattr(target, name)[...] += scale * getattr(other, name)


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    pair_loss: float
    reg_value: float
    total: float


def write_train_log(history: Sequence[EpochStats], path: str | Path) -> None:
    """One line per epoch: "epoch<TAB>pair_loss<TAB>reg_value<TAB>total"."""
    with open(path, "w", encoding="utf-8") as f:
        for s in history:
            f.write(f"{s.epoch}\t{s.pair_loss!r}\t{s.reg_value!r}\t{s.total!r}\n")


def _resolve_embedding(
    key: str, caption_store: EmbeddingStore, doc_store: EmbeddingStore | None
) -> np.ndarray:
    if key in caption_store:
        return caption_store.vector(key)
    if doc_store is not None and key in doc_store:
        return doc_store.vector(key)
    raise DataError(f"missing embedding for key {key!r}")


def train(
    pairs_dataset: Sequence,
    caption_store: EmbeddingStore,
    doc_store: EmbeddingStore | None = None,
    corpus: Corpus | None = None,
    cfg: TrainConfig = TrainConfig(),
    images: Sequence[UnlabeledCaptions] | None = None,
) -> tuple[MatcherParams, list[EpochStats]]:
    """Two-phase seeded training; returns final parameters and epoch stats.

    Phase 1 runs ``cfg.epochs`` epochs of pair-loss training. When
    ``cfg.reg_weight > 0``, phase 2 runs ``cfg.reg_epochs`` further epochs
    where each step adds the weighted regularizer computed on a freshly
    sampled batch of ``cfg.reg_image_batch`` images scored against the
    (optionally sampled) corpus. ``images`` supplies the caption grouping
    for those batches and is required for phase 2.
    """
    if not pairs_dataset:
        raise DataError("empty training set")
    run_phase2 = cfg.reg_weight > 0.0 and cfg.reg_epochs > 0
    if run_phase2 and (doc_store is None or corpus is None or images is None):
        raise DataError(
            "training with a positive regularizer weight needs a document "
            "store, a corpus, and the caption sets for image batches"
        )

    dim = caption_store.dim
    if doc_store is not None and doc_store.dim != dim:
        raise DataError(
            f"store dims differ: captions {dim}, documents {doc_store.dim}"
        )

    e1 = np.empty((len(pairs_dataset), dim))
    e2 = np.empty((len(pairs_dataset), dim))
    for i, pair in enumerate(pairs_dataset):
        e1[i] = _resolve_embedding(pair.a_key, caption_store, doc_store)
        e2[i] = _resolve_embedding(pair.b_key, caption_store, doc_store)
    y = _encode_labels([p.label for p in pairs_dataset], cfg.n_classes)

    params = init_params(dim, cfg.proj_dim, cfg.hidden_dim, cfg.n_classes, cfg.seed)
    adam = _Adam(params, cfg)
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _RNG_SHUFFLE]))
    reg_rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, _RNG_REG]))

    if run_phase2:
        assert corpus is not None and doc_store is not None and images is not None
        sent_keys = [k for k, _ in corpus.iter_sentences()]
        all_sents = doc_store.matrix(sent_keys)
        sents_per_doc = [len(d.sentences) for d in corpus.documents]
        doc_spans = np.cumsum([0] + sents_per_doc)
        all_caps = caption_store.matrix(
            [k for img in images for k in img.caption_keys]
        )
        caps_per_image = [len(img.captions) for img in images]
        cap_spans = np.cumsum([0] + caps_per_image)

    def reg_term() -> tuple[float, MatcherParams]:
        n_img = len(images)
        chosen = np.sort(reg_rng.choice(n_img, size=min(cfg.reg_image_batch, n_img), replace=False))
        rows = np.concatenate([np.arange(cap_spans[i], cap_spans[i + 1]) for i in chosen])
        cap_batch = all_caps[rows]
        batch_caps_per_image = [caps_per_image[i] for i in chosen]
        if cfg.reg_doc_sample is not None and cfg.reg_doc_sample < len(corpus):
            docs = np.sort(reg_rng.choice(len(corpus), size=cfg.reg_doc_sample, replace=False))
            sent_rows = np.concatenate(
                [np.arange(doc_spans[j], doc_spans[j + 1]) for j in docs]
            )
            sent_batch = all_sents[sent_rows]
            batch_sents_per_doc = [sents_per_doc[j] for j in docs]
        else:
            sent_batch = all_sents
            batch_sents_per_doc = sents_per_doc
        return _reg_step(params, cap_batch, batch_caps_per_image, sent_batch, batch_sents_per_doc)

    history: list[EpochStats] = []
    n = len(pairs_dataset)
    step = 0
    total_epochs = cfg.epochs + (cfg.reg_epochs if run_phase2 else 0)
    for epoch in range(total_epochs):
        with_reg = epoch >= cfg.epochs
        order = shuffle_rng.permutation(n)
        losses, reg_values = [], []
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            loss, grads = _pair_loss_grads(e1[idx], e2[idx], y[idx], params)
            step += 1
            if not np.isfinite(loss):
                raise NumericError(f"non-finite pair loss at step {step}")
            if with_reg:
                reg_value, reg_grads = reg_term()
                if not np.isfinite(reg_value):
                    raise NumericError(f"non-finite regularizer value at step {step}")
                _add_grads(grads, reg_grads, cfg.reg_weight)
                reg_values.append(reg_value)
            losses.append(loss)
            adam.update(params, grads)
        pair_loss = float(np.mean(losses))
        reg_value = float(np.mean(reg_values)) if reg_values else 0.0
        history.append(
            EpochStats(epoch + 1, pair_loss, reg_value, pair_loss + cfg.reg_weight * reg_value)
        )
    return params, history


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(params: MatcherParams, path: str | Path) -> None:
    """Binary checkpoint, little-endian: magic, u32 version, u32 dims
    (embed, proj, hidden, n_classes), then float64 blocks in field order."""
    params.validate()
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(
            struct.pack(
                "<IIIII",
                CHECKPOINT_VERSION,
                params.embed_dim,
                params.proj_dim,
                params.hidden_dim,
                params.n_classes,
            )
        )
        for name in _PARAM_FIELDS:
            f.write(np.ascontiguousarray(getattr(params, name), dtype="<f8").tobytes())


def load_checkpoint(path: str | Path) -> MatcherParams:
    def read_exact(f, count: int, what: str) -> bytes:
        data = f.read(count)
        if len(data) != count:
            raise DataError(f"{path}: truncated checkpoint while reading {what}")
        return data

    with open(path, "rb") as f:
        magic = read_exact(f, len(CHECKPOINT_MAGIC), "magic")
        if magic != CHECKPOINT_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {CHECKPOINT_MAGIC!r}")
        version, d, p, q, c = struct.unpack("<IIIII", read_exact(f, 20, "header"))
        if version != CHECKPOINT_VERSION:
            raise DataError(f"{path}: unsupported version {version}")
        if c not in (1, 3) or min(d, p, q) < 1:
            raise DataError(f"{path}: invalid dims d={d} p={p} q={q} n_classes={c}")
        shapes = [(p, d), (p,), (q, 3 * p), (q,), (c, q), (c,)]
        arrays = []
        for name, shape in zip(_PARAM_FIELDS, shapes):
            count = 8 * int(np.prod(shape))
            arr = np.frombuffer(read_exact(f, count, name), dtype="<f8").reshape(shape)
            arrays.append(arr.copy())
        if f.read(1):
            raise DataError(f"{path}: trailing bytes after parameter blocks")
    params = MatcherParams(*arrays)
    params.validate()
    return params


# ---------------------------------------------------------------------------
# Gradient verification
# ---------------------------------------------------------------------------


def _fd_gradients(
    value_fn: Callable[[], float], params: MatcherParams, step: float
) -> MatcherParams:
    grads = zeros_like_params(params)
    for name in _PARAM_FIELDS:
        arr = getattr(params, name)
        out = getattr(grads, name)
        flat, flat_out = arr.ravel(), out.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = value_fn()
            flat[i] = orig - step
            down = value_fn()
            flat[i] = orig
            flat_out[i] = (up - down) / (2.0 * step)
    return grads


def _max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    # Relative error with an absolute floor so near-zero entries compare by
    # absolute difference instead of blowing up.
    denom = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-4)
    return float(np.max(np.abs(analytic - numeric) / denom))


def gradient_check(
    batch: Sequence[tuple[np.ndarray, np.ndarray, str]],
    params: MatcherParams,
    step: float = 1e-5,
) -> float:
    """Max relative error of the pair-loss gradients vs central differences."""
    params = params.copy()
    analytic = loss_pairs(batch, params)[1]
    numeric = _fd_gradients(lambda: loss_pairs(batch, params)[0], params, step)
    return max(
        _max_relative_error(getattr(analytic, n), getattr(numeric, n))
        for n in _PARAM_FIELDS
    )


def gradient_check_regularizer(batch_probs: np.ndarray, step: float = 1e-5) -> float:
    """Max relative error of the regularizer gradient vs central differences.

    The regularizer is treated as an unconstrained function of its input
    vectors, matching the gradient that flows into the softmax backward pass.
    """
    probs = np.array(batch_probs, dtype=np.float64)
    analytic = regularizer(probs, validate=False)[1]
    numeric = np.zeros_like(probs)
    flat, flat_out = probs.ravel(), numeric.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        up = regularizer(probs, validate=False)[0]
        flat[i] = orig - step
        down = regularizer(probs, validate=False)[0]
        flat[i] = orig
        flat_out[i] = (up - down) / (2.0 * step)
    return _max_relative_error(analytic, numeric)


def random_probe(
    seed: int,
    embed_dim: int = 6,
    proj_dim: int = 6,
    hidden_dim: int = 6,
    n_pairs: int = 8,
    classes: int = 3,
    margin: float = 1e-3,
) -> tuple[MatcherParams, list[tuple[np.ndarray, np.ndarray, str]]]:
    """Random params and batch that keep every ReLU/abs input away from its
    kink by ``margin``, so finite differences are valid at step sizes below it.
    """
    n_classes = 1 if classes == 2 else 3
    label_pool = ["positive", "negative"] if classes == 2 else list(CLASS3_INDEX)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 99]))
    for _ in range(100):
        params = MatcherParams(
            rng.normal(0.0, 0.6, size=(proj_dim, embed_dim)),
            rng.normal(0.0, 0.3, size=proj_dim),
            rng.normal(0.0, 0.6, size=(hidden_dim, 3 * proj_dim)),
            rng.normal(0.0, 0.3, size=hidden_dim),
            rng.normal(0.0, 0.6, size=(n_classes, hidden_dim)),
            rng.normal(0.0, 0.3, size=n_classes),
        )
        e1 = rng.normal(size=(n_pairs, embed_dim))
        e2 = rng.normal(size=(n_pairs, embed_dim))
        _, cache = _forward_batch(e1, e2, params)
        both_dead = (cache.a1 < -margin) & (cache.a2 < -margin)
        clear_of_kinks = (
            np.all(np.abs(cache.a1) > margin)
            and np.all(np.abs(cache.a2) > margin)
            and np.all(np.abs(cache.v) > margin)
            and np.all(both_dead | (np.abs(cache.diff) > margin))
        )
        if clear_of_kinks:
            labels = [label_pool[int(rng.integers(len(label_pool)))] for _ in range(n_pairs)]
            return params, [(e1[i], e2[i], labels[i]) for i in range(n_pairs)]
    raise NumericError("could not sample a kink-free probe; widen the margin")
