"""Dense retrieval over the atomic QA knowledge base.

Each valid pair embeds as the single string "question answer" (one space
between the two parts), L2-normalized, so exhaustive dot-product search
is exact cosine search. The index is immutable once built; concurrent
searches are safe.
"""

from __future__ import annotations

import json
import logging
import math
from array import array
from dataclasses import dataclass
from typing import Sequence

from compactrag._kernels import cosine_topk
from compactrag.backends.base import Embedder, EmbeddingVector
from compactrag.errors import ConfigError, FileFormatError
from compactrag.kbgen import KnowledgeBase, QAPair

logger = logging.getLogger(__name__)

INDEX_FORMAT_VERSION = "1"
DEFAULT_TOP_K = 5


@dataclass(frozen=True)
class IndexEntry:
    qa_id: str
    vector: tuple[float, ...]


@dataclass(frozen=True)
class RetrievalResult:
    qa_id: str
    score: float


def l2_normalize(values: Sequence[float]) -> tuple[float, ...]:
    acc = 0.0
    for v in values:
        acc += v * v
    norm = math.sqrt(acc)
    if norm == 0.0:
        raise ConfigError("cannot normalize a zero vector")
    return tuple(v / norm for v in values)


def pair_text(pair: QAPair) -> str:
    return f"{pair.question} {pair.answer}"


def encode_pair(pair: QAPair, embedder: Embedder) -> tuple[float, ...]:
    """Joint question-answer embedding, L2-normalized."""
    [vector] = embedder.embed([pair_text(pair)])
    return l2_normalize(vector.values)


class VectorIndex:
    def __init__(self, entries: Sequence[IndexEntry], dim: int, kb_ref: str) -> None:
        if dim <= 0:
            raise ConfigError("index dim must be positive")
        for entry in entries:
            if len(entry.vector) != dim:
                raise ConfigError(
                    f"entry {entry.qa_id} has dim {len(entry.vector)}, index dim is {dim}"
                )
        ids = [e.qa_id for e in entries]
        if len(set(ids)) != len(ids):
            raise ConfigError("duplicate qa_id in index entries")
        self.entries: tuple[IndexEntry, ...] = tuple(entries)
        self.dim = dim
        self.kb_ref = kb_ref
        flat = array("d")
        for entry in self.entries:
            flat.extend(entry.vector)
        self._matrix = flat

    def __len__(self) -> int:
        return len(self.entries)


def build_index(kb: KnowledgeBase, embedder: Embedder, batch_size: int = 64) -> VectorIndex:
    """Index the valid pairs of a KB, preserving KB order."""
    pairs = [p for p in kb.pairs if p.valid]
    if not pairs:
        raise ConfigError("no valid pairs to index")
    vectors: list[EmbeddingVector] = []
    for start in range(0, len(pairs), batch_size):
        batch = pairs[start : start + batch_size]
        vectors.extend(embedder.embed([pair_text(p) for p in batch]))
    dims = {v.dim for v in vectors}
    if len(dims) != 1:
        raise ConfigError(f"embedder returned mixed dimensions: {sorted(dims)}")
    entries = [
        IndexEntry(pair.qa_id, l2_normalize(vector.values))
        for pair, vector in zip(pairs, vectors)
    ]
    return VectorIndex(entries, dims.pop(), kb.source_corpus_id)


def search(
    index: VectorIndex,
    query_text: str,
    k: int,
    embedder: Embedder,
) -> list[RetrievalResult]:
    """Exact exhaustive cosine top-k; ties keep the earlier entry."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not query_text or query_text.isspace():
        raise ValueError("query text must be non-empty")
    [vector] = embedder.embed([query_text])
    if vector.dim != index.dim:
        raise ConfigError(f"query dim {vector.dim} does not match index dim {index.dim}")
    query = array("d", l2_normalize(vector.values))
    hits = cosine_topk(index._matrix, len(index.entries), index.dim, query, k)
    return [RetrievalResult(index.entries[i].qa_id, score) for i, score in hits]


def save_index(index: VectorIndex, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        header = {
            "version": INDEX_FORMAT_VERSION,
            "dim": index.dim,
            "kb_ref": index.kb_ref,
        }
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for entry in index.entries:
            record = {"qa_id": entry.qa_id, "vector": list(entry.vector)}
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")


def load_index(path: str) -> VectorIndex:
    with open(path, "r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise FileFormatError(f"{path}: missing index header")
        header = json.loads(header_line)
        version = header.get("version")
        if version != INDEX_FORMAT_VERSION:
            raise FileFormatError(
                f"{path}: unsupported index version {version!r}, expected {INDEX_FORMAT_VERSION!r}"
            )
        entries = []
        for line in fh:
            if not line.strip():
                continue
            record = json.loads(line)
            entries.append(IndexEntry(record["qa_id"], tuple(record["vector"])))
    return VectorIndex(entries, int(header["dim"]), header["kb_ref"])
