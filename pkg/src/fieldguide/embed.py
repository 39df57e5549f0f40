"""Sentence embedding providers and the precomputed embedding store.

Two providers: a self-contained seeded feature-hashing bag of words (the
default), and import of externally computed vectors (text format), for
plugging in a real pretrained backbone's embeddings. Stores hold float32
vectors keyed by stable sentence keys; training upcasts to float64.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Protocol

import numpy as np

from .errors import DataError
from .text import tokenize

STORE_MAGIC = b"CLEVEMB1"
STORE_VERSION = 1


class EmbeddingProvider(Protocol):
    """Deterministic sentence -> fixed-width vector mapping."""

    dim: int

    def embed(self, sentence: str) -> np.ndarray: ...


@dataclass(frozen=True)
class HashedBowConfig:
    dim: int = 256
    seed: int = 42

    def __post_init__(self):
        if self.dim < 8:
            raise ValueError(f"dim must be >= 8, got {self.dim}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


def _token_bucket_sign(token: str, seed: int, dim: int) -> tuple[int, float]:
    digest = hashlib.blake2b(
        token.encode("utf-8"), digest_size=16, key=seed.to_bytes(8, "little")
    ).digest()
    bucket = int.from_bytes(digest[:8], "little") % dim
    sign = 1.0 if digest[8] & 1 else -1.0
    return bucket, sign


def embed_hashed_bow(sentence: str, cfg: HashedBowConfig) -> np.ndarray:
    """Signed feature hashing with mean pooling and L2 normalization.

    Each token lands in ``hash % dim`` with a +/-1 sign from a second hash
    bit; the accumulator is divided by the token count and L2-normalized.
    An all-zero accumulator (no tokens, or full sign cancellation) is
    returned as-is. Result dtype is float32.
    """
    vec = np.zeros(cfg.dim, dtype=np.float64)
    tokens = tokenize(sentence)
    for token in tokens:
        bucket, sign = _token_bucket_sign(token, cfg.seed, cfg.dim)
        vec[bucket] += sign
    if tokens:
        vec /= len(tokens)
    norm = np.linalg.norm(vec)
    if norm > 0.0:
        vec /= norm
    return vec.astype(np.float32)


@dataclass(frozen=True)
class HashedBowProvider:
    cfg: HashedBowConfig = field(default_factory=HashedBowConfig)

    @property
    def dim(self) -> int:
        return self.cfg.dim

    def embed(self, sentence: str) -> np.ndarray:
        return embed_hashed_bow(sentence, self.cfg)


class EmbeddingStore:
    """Read-only map from sentence key to a float32 vector of fixed width."""

    def __init__(self, dim: int, vectors: dict[str, np.ndarray] | None = None):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self._vectors: dict[str, np.ndarray] = {}
        for key, vec in (vectors or {}).items():
            self._add(key, vec)

    def _add(self, key: str, vec: np.ndarray) -> None:
        if key in self._vectors:
            raise DataError(f"duplicate embedding key {key!r}")
        vec = np.asarray(vec, dtype=np.float32)
        if vec.shape != (self.dim,):
            raise DataError(
                f"vector for {key!r} has shape {vec.shape}, expected ({self.dim},)"
            )
        if not np.all(np.isfinite(vec)):
            raise DataError(f"vector for {key!r} has non-finite entries")
        vec.flags.writeable = False
        self._vectors[key] = vec

    def __len__(self) -> int:
        return len(self._vectors)

    def __contains__(self, key: str) -> bool:
        return key in self._vectors

    def vector(self, key: str) -> np.ndarray:
        try:
            return self._vectors[key]
        except KeyError:
            raise DataError(f"missing embedding for key {key!r}") from None

    def matrix(self, keys: Iterable[str], dtype=np.float64) -> np.ndarray:
        """Stack vectors for ``keys`` into a (len(keys), dim) array."""
        return np.array([self.vector(k) for k in keys], dtype=dtype).reshape(-1, self.dim)

    def items(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(self._vectors.items())

    def keys(self) -> Iterator[str]:
        return iter(self._vectors)


def build_store(
    sentences: Iterable[tuple[str, str]], provider: EmbeddingProvider
) -> EmbeddingStore:
    """Embed (key, sentence) pairs into a store; duplicate keys are an error."""
    store = EmbeddingStore(provider.dim)
    for key, sentence in sentences:
        store._add(key, provider.embed(sentence))
    return store


def save_store(store: EmbeddingStore, path: str | Path) -> None:
    """Binary store file, little-endian: magic, u32 version, u32 dim, u64 count,
    then per record [u32 key length, key UTF-8 bytes, dim x f32].
    """
    with open(path, "wb") as f:
        f.write(STORE_MAGIC)
        f.write(struct.pack("<IIQ", STORE_VERSION, store.dim, len(store)))
        for key, vec in store.items():
            encoded = key.encode("utf-8")
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            f.write(vec.astype("<f4").tobytes())


def load_store(path: str | Path) -> EmbeddingStore:
    def read_exact(f, n: int, what: str) -> bytes:
        data = f.read(n)
        if len(data) != n:
            raise DataError(f"{path}: truncated store file while reading {what}")
        return data

    with open(path, "rb") as f:
        magic = read_exact(f, len(STORE_MAGIC), "magic")
        if magic != STORE_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {STORE_MAGIC!r}")
        version, dim, count = struct.unpack("<IIQ", read_exact(f, 16, "header"))
        if version != STORE_VERSION:
            raise DataError(f"{path}: unsupported version {version}")
        if dim < 1:
            raise DataError(f"{path}: invalid dim {dim}")
        store = EmbeddingStore(dim)
        for i in range(count):
            (key_len,) = struct.unpack("<I", read_exact(f, 4, f"key length {i}"))
            key = read_exact(f, key_len, f"key {i}").decode("utf-8")
            vec = np.frombuffer(read_exact(f, 4 * dim, f"vector {i}"), dtype="<f4")
            store._add(key, vec)
        if f.read(1):
            raise DataError(f"{path}: trailing bytes after {count} records")
    return store


def load_store_text(path: str | Path) -> EmbeddingStore:
    """Import text-format embeddings: one record per line, "key\\tv1 v2 ... vdim".

    The dimension is defined by the first record.
    """
    store: EmbeddingStore | None = None
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            key, sep, values = line.rstrip("\n").partition("\t")
            if not sep or not key:
                raise DataError(f"{path}:{lineno}: expected 'key<TAB>values'")
            try:
                vec = np.array([float(v) for v in values.split()], dtype=np.float32)
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric vector entry") from None
            if vec.size == 0:
                raise DataError(f"{path}:{lineno}: empty vector")
            if store is None:
                store = EmbeddingStore(len(vec))
            elif len(vec) != store.dim:
                raise DataError(
                    f"{path}:{lineno}: dim {len(vec)} does not match first record dim {store.dim}"
                )
            store._add(key, vec)
    if store is None:
        raise DataError(f"{path}: empty embedding file")
    return store
