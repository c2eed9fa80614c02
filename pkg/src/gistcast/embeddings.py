"""Sentence-embedding storage and mean pooling.

Binary layout: magic ``EMB1``, u32 little-endian dim, u64 little-endian row
count, then row-major 32-bit little-endian floats. A sidecar
``<file>.ids.jsonl`` maps rows to sentence ids. Storage is 32-bit; all
arithmetic promotes to 64-bit.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._util import atomic_write_bytes, atomic_write_text
from .bootstrap import PseudoArticle, PseudoCollection
from .panel import CountryMonthKey

MAGIC = b"EMB1"
DEFAULT_DIM = 768
_HEADER = struct.Struct("<4sIQ")


@dataclass
class EmbeddingTable:
    """Immutable-after-load table of per-sentence embedding rows."""

    dim: int
    ids: list[str]
    data: np.ndarray  # (len(ids), dim) float32

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float32)
        if self.dim <= 0:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if self.data.shape != (len(self.ids), self.dim):
            raise ValueError(
                f"data shape {self.data.shape} != ({len(self.ids)}, {self.dim})"
            )
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate sentence ids")
        if not np.isfinite(self.data).all():
            raise ValueError("non-finite embedding values")
        self._row_of = {sid: i for i, sid in enumerate(self.ids)}

    def row(self, sid: str) -> np.ndarray:
        try:
            return self.data[self._row_of[sid]]
        except KeyError:
            raise KeyError(f"unknown sentence_id {sid!r}") from None

    def rows(self, sids: Sequence[str]) -> np.ndarray:
        idx = []
        for sid in sids:
            if sid not in self._row_of:
                raise KeyError(f"unknown sentence_id {sid!r}")
            idx.append(self._row_of[sid])
        return self.data[idx]


@dataclass
class CollectionEmbedding:
    """m pseudo-article embeddings for one (key, fold) collection."""

    key: CountryMonthKey
    fold: int
    matrix: np.ndarray  # (m, dim) float64

    def __post_init__(self) -> None:
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2:
            raise ValueError(f"matrix must be 2-D, got shape {self.matrix.shape}")
        if not np.isfinite(self.matrix).all():
            raise ValueError("non-finite collection embedding")


def pool_article(pseudo: PseudoArticle, table: EmbeddingTable) -> np.ndarray:
    """Mean of the drawn sentence rows; repeats count with multiplicity."""
    rows = table.rows(pseudo.sentence_ids)
    return rows.astype(np.float64).mean(axis=0)


def embed_collection(coll: PseudoCollection, table: EmbeddingTable) -> CollectionEmbedding:
    matrix = np.empty((len(coll.articles), table.dim), dtype=np.float64)
    for i, article in enumerate(coll.articles):
        matrix[i] = pool_article(article, table)
    return CollectionEmbedding(key=coll.key, fold=coll.fold, matrix=matrix)


def _ids_path(path: str | Path) -> Path:
    return Path(str(path) + ".ids.jsonl")


def write_table(table: EmbeddingTable, path: str | Path) -> None:
    payload = _HEADER.pack(MAGIC, table.dim, len(table.ids))
    payload += np.ascontiguousarray(table.data, dtype="<f4").tobytes()
    atomic_write_bytes(path, payload)
    lines = [
        json.dumps({"row": i, "sentence_id": sid}, sort_keys=True)
        for i, sid in enumerate(table.ids)
    ]
    atomic_write_text(_ids_path(path), "\n".join(lines) + "\n")


def read_table(path: str | Path) -> EmbeddingTable:
    """Read a binary embedding file plus its id sidecar, with validation."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size or raw[:4] != MAGIC:
        raise ValueError(f"{path}: bad magic, not an embedding file")
    _, dim, count = _HEADER.unpack_from(raw)
    expected = _HEADER.size + 4 * dim * count
    if len(raw) < expected:
        raise ValueError(
            f"{path}: truncated payload, expected {expected} bytes, got {len(raw)}"
        )
    if len(raw) > expected:
        raise ValueError(f"{path}: trailing bytes after payload")
    data = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size).reshape(count, dim)

    ids: list[str] = []
    with open(_ids_path(path), "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "meta" in obj and "sentence_id" not in obj:
                continue
            if int(obj["row"]) != len(ids):
                raise ValueError(f"{_ids_path(path)} line {line_no}: rows out of order")
            ids.append(str(obj["sentence_id"]))
    if len(ids) != count:
        raise ValueError(
            f"{path}: manifest mismatch, sidecar has {len(ids)} ids but header says {count} rows"
        )
    return EmbeddingTable(dim=dim, ids=ids, data=data.copy())
