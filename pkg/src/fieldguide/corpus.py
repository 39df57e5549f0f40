"""Expert corpus and caption dataset model plus line-delimited JSON ingestion.

The corpus holds exactly one document per fine-grained category. Caption sets
may carry a ground-truth ``class_id`` for evaluation; training code must only
ever see the label-stripped view produced by :func:`strip_labels`.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import DataError
from .text import DEFAULT_ABBREVIATIONS, split_sentences


def sentence_key(doc_id: str, index: int) -> str:
    """Stable key for a document sentence."""
    return f"doc:{doc_id}:s{index}"


def caption_key(image_id: str, index: int) -> str:
    """Stable key for a caption of an image."""
    return f"img:{image_id}:c{index}"


@dataclass(frozen=True)
class Document:
    doc_id: str
    class_name: str
    sentences: tuple[str, ...]
    sentence_keys: tuple[str, ...]

    def __post_init__(self):
        if not self.sentences:
            raise DataError(f"document {self.doc_id!r} has no sentences")
        if len(self.sentence_keys) != len(self.sentences):
            raise DataError(f"document {self.doc_id!r}: key/sentence length mismatch")

    @classmethod
    def from_sentences(cls, doc_id: str, class_name: str, sentences: Sequence[str]) -> "Document":
        keys = tuple(sentence_key(doc_id, i) for i in range(len(sentences)))
        return cls(doc_id, class_name, tuple(sentences), keys)


@dataclass(frozen=True)
class CaptionSet:
    """Descriptions attached to one image; class_id present only in eval files."""

    image_id: str
    captions: tuple[str, ...]
    class_id: str | None = None

    def __post_init__(self):
        if not self.captions:
            raise DataError(f"image {self.image_id!r} has no captions")

    @property
    def caption_keys(self) -> tuple[str, ...]:
        return tuple(caption_key(self.image_id, i) for i in range(len(self.captions)))


@dataclass(frozen=True)
class UnlabeledCaptions:
    """Label-stripped view of a caption set: all that training may read."""

    image_id: str
    captions: tuple[str, ...]

    @property
    def caption_keys(self) -> tuple[str, ...]:
        return tuple(caption_key(self.image_id, i) for i in range(len(self.captions)))


def strip_labels(caption_sets: Iterable[CaptionSet]) -> list[UnlabeledCaptions]:
    """Drop class_id so training-path code cannot read it."""
    return [UnlabeledCaptions(cs.image_id, cs.captions) for cs in caption_sets]


class Corpus:
    """Ordered, immutable document collection; order is the canonical tie-break."""

    def __init__(self, documents: Sequence[Document]):
        self.documents: tuple[Document, ...] = tuple(documents)
        self._by_id = {}
        seen_keys: set[str] = set()
        for doc in self.documents:
            if doc.doc_id in self._by_id:
                raise DataError(f"duplicate doc_id {doc.doc_id!r}")
            self._by_id[doc.doc_id] = doc
            for key in doc.sentence_keys:
                if key in seen_keys:
                    raise DataError(f"duplicate sentence key {key!r}")
                seen_keys.add(key)

    def __len__(self) -> int:
        return len(self.documents)

    def __iter__(self) -> Iterator[Document]:
        return iter(self.documents)

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self._by_id

    def get(self, doc_id: str) -> Document:
        try:
            return self._by_id[doc_id]
        except KeyError:
            raise DataError(f"unknown doc_id {doc_id!r}") from None

    @property
    def doc_ids(self) -> tuple[str, ...]:
        return tuple(d.doc_id for d in self.documents)

    def iter_sentences(self) -> Iterator[tuple[str, str]]:
        """Yield (sentence_key, sentence_text) in corpus order."""
        for doc in self.documents:
            yield from zip(doc.sentence_keys, doc.sentences)

    def content_id(self) -> str:
        """Short stable hash of the corpus contents, used as a snapshot id."""
        h = hashlib.sha256()
        for doc in self.documents:
            h.update(json.dumps([doc.doc_id, doc.class_name, list(doc.sentences)]).encode())
        return h.hexdigest()[:12]


def _read_records(path: str | Path) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: invalid JSON record: {e}") from None
            if not isinstance(record, dict):
                raise DataError(f"{path}:{lineno}: record is not an object")
            yield lineno, record


def load_corpus(
    path: str | Path, abbreviations: frozenset[str] = DEFAULT_ABBREVIATIONS
) -> Corpus:
    """Load a corpus file; raw "text" fields are sentence-split, pre-split
    "sentences" records pass through unchanged.
    """
    documents = []
    seen = set()
    for lineno, record in _read_records(path):
        try:
            doc_id = record["doc_id"]
            class_name = record["class_name"]
        except KeyError as e:
            raise DataError(f"{path}:{lineno}: missing field {e}") from None
        if not isinstance(doc_id, str) or not doc_id:
            raise DataError(f"{path}:{lineno}: doc_id must be a non-empty string")
        if doc_id in seen:
            raise DataError(f"{path}:{lineno}: duplicate doc_id {doc_id!r}")
        seen.add(doc_id)
        if "sentences" in record:
            sentences = record["sentences"]
            if not isinstance(sentences, list) or not all(
                isinstance(s, str) and s.strip() for s in sentences
            ):
                raise DataError(f"{path}:{lineno}: sentences must be non-empty strings")
        elif "text" in record:
            sentences = split_sentences(record["text"], abbreviations)
        else:
            raise DataError(f"{path}:{lineno}: record needs 'text' or 'sentences'")
        if not sentences:
            raise DataError(f"{path}:{lineno}: document {doc_id!r} has no sentences")
        documents.append(Document.from_sentences(doc_id, class_name, sentences))
    if not documents:
        raise DataError(f"{path}: empty corpus")
    return Corpus(documents)


def load_captions(path: str | Path) -> list[CaptionSet]:
    caption_sets = []
    seen = set()
    for lineno, record in _read_records(path):
        try:
            image_id = record["image_id"]
            captions = record["captions"]
        except KeyError as e:
            raise DataError(f"{path}:{lineno}: missing field {e}") from None
        if not isinstance(image_id, str) or not image_id:
            raise DataError(f"{path}:{lineno}: image_id must be a non-empty string")
        if image_id in seen:
            raise DataError(f"{path}:{lineno}: duplicate image_id {image_id!r}")
        seen.add(image_id)
        if not isinstance(captions, list) or not captions or not all(
            isinstance(c, str) and c.strip() for c in captions
        ):
            raise DataError(f"{path}:{lineno}: captions must be a non-empty string list")
        class_id = record.get("class_id")
        if class_id is not None and not isinstance(class_id, str):
            raise DataError(f"{path}:{lineno}: class_id must be a string if present")
        caption_sets.append(CaptionSet(image_id, tuple(captions), class_id))
    if not caption_sets:
        raise DataError(f"{path}: empty captions file")
    return caption_sets


def filter_corpus(corpus: Corpus, keep: Iterable[str]) -> Corpus:
    """Sub-corpus restricted to ``keep``, preserving order and sentence keys."""
    keep = set(keep)
    unknown = keep - set(corpus.doc_ids)
    if unknown:
        raise DataError(f"unknown doc_ids in keep set: {sorted(unknown)}")
    if len(keep) < 2:
        raise DataError("a scoring corpus needs at least 2 documents")
    return Corpus([d for d in corpus.documents if d.doc_id in keep])


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    """Write the canonical (pre-split) corpus file."""
    with open(path, "w", encoding="utf-8") as f:
        for doc in corpus.documents:
            record = {
                "doc_id": doc.doc_id,
                "class_name": doc.class_name,
                "sentences": list(doc.sentences),
            }
            f.write(json.dumps(record, ensure_ascii=False) + "\n")


def save_captions(caption_sets: Iterable[CaptionSet], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for cs in caption_sets:
            record: dict = {"image_id": cs.image_id}
            if cs.class_id is not None:
                record["class_id"] = cs.class_id
            record["captions"] = list(cs.captions)
            f.write(json.dumps(record, ensure_ascii=False) + "\n")
