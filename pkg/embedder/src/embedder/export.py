"""Sentence-embedding export.

Reads a corpus JSONL (one article per line: article_id, country, month,
sentences), encodes every sentence with the selected backend, and writes
the `EMB1` binary format plus its id sidecar. Row order follows corpus
sentence order exactly, with ids ``<article_id>#<sentence_index>``.

Backends are picked by the model identifier, which is always explicit:

- ``hash:<dim>`` — an offline deterministic featurizer (seeded per-token
  vectors, mean-pooled). Useful for tests and plumbing checks; carries no
  semantics.
- anything else — a sentence-transformers model name or local path,
  encoded in eval mode with inference disabled gradients. Mean pooling is
  whatever the model card defines; for bare transformer checkpoints
  sentence-transformers applies mean pooling over token states.
"""
from __future__ import annotations

import hashlib
import json
import os
import re
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator

import numpy as np

MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sIQ")
_MONTH_RE = re.compile(r"^\d{4}-(0[1-9]|1[0-2])$")
_TOKEN_RE = re.compile(r"\S+")


class CorpusError(ValueError):
    """The corpus file is unreadable or violates the JSONL schema."""


class EncoderError(RuntimeError):
    """The requested encoder could not be loaded or misbehaved."""


@dataclass
class EmbedJob:
    corpus: Path
    out: Path
    model: str
    batch_size: int = 32
    device: str | None = None
    expect_dim: int | None = None

    def __post_init__(self) -> None:
        if not self.model:
            raise EncoderError("a model identifier is required")
        if self.batch_size < 1:
            raise ValueError(f"batch size must be >= 1, got {self.batch_size}")


def read_sentences(corpus_path: Path) -> list[tuple[str, str]]:
    """(sentence_id, text) pairs in corpus order, schema-validated."""
    try:
        raw = corpus_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"unreadable corpus {corpus_path}: {exc}") from exc
    pairs: list[tuple[str, str]] = []
    seen_articles: set[str] = set()
    for line_no, line in enumerate(raw.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{corpus_path} line {line_no}: bad JSON: {exc}") from exc
        if "meta" in obj and "article_id" not in obj:
            continue
        try:
            article_id = str(obj["article_id"])
            month = str(obj["month"])
            sentences = list(obj["sentences"])
        except (KeyError, TypeError) as exc:
            raise CorpusError(f"{corpus_path} line {line_no}: {exc!r}") from exc
        if not _MONTH_RE.match(month):
            raise CorpusError(f"{corpus_path} line {line_no}: bad month {month!r}")
        if not sentences or any(not isinstance(s, str) or not s for s in sentences):
            raise CorpusError(f"{corpus_path} line {line_no}: empty sentence list or sentence")
        if article_id in seen_articles:
            raise CorpusError(f"{corpus_path} line {line_no}: duplicate article_id {article_id}")
        seen_articles.add(article_id)
        for index, text in enumerate(sentences):
            pairs.append((f"{article_id}#{index}", text))
    if not pairs:
        raise CorpusError(f"{corpus_path}: no articles")
    return pairs


def _hash_token_vector(token: str, dim: int) -> np.ndarray:
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    seed = int.from_bytes(digest[:8], "little")
    rng = np.random.default_rng(seed)
    vec = rng.standard_normal(dim)
    return vec / np.linalg.norm(vec)


def make_hash_encoder(dim: int) -> Callable[[list[str]], np.ndarray]:
    """Deterministic offline featurizer: mean of seeded per-token vectors."""
    if dim < 1:
        raise EncoderError(f"hash encoder dim must be >= 1, got {dim}")
    cache: dict[str, np.ndarray] = {}

    def encode(batch: list[str]) -> np.ndarray:
        out = np.zeros((len(batch), dim), dtype=np.float64)
        for i, text in enumerate(batch):
            tokens = _TOKEN_RE.findall(text.lower())
            if not tokens:
                continue
            acc = np.zeros(dim)
            for token in tokens:
                vec = cache.get(token)
                if vec is None:
                    vec = cache[token] = _hash_token_vector(token, dim)
                acc += vec
            out[i] = acc / len(tokens)
        return out.astype(np.float32)

    return encode


def make_transformer_encoder(
    model_name: str,
    device: str | None,
) -> Callable[[list[str]], np.ndarray]:
    """sentence-transformers backend, eval mode, deterministic on CPU."""
    try:
        import torch
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:
        raise EncoderError(f"sentence-transformers backend unavailable: {exc}") from exc
    try:
        model = SentenceTransformer(model_name, device=device or "cpu")
    except Exception as exc:
        raise EncoderError(f"cannot load encoder {model_name!r}: {exc}") from exc
    model.eval()

    def encode(batch: list[str]) -> np.ndarray:
        with torch.inference_mode():
            out = model.encode(batch, batch_size=len(batch),
                               convert_to_numpy=True, show_progress_bar=False)
        return np.asarray(out, dtype=np.float32)

    return encode


def make_encoder(model: str, device: str | None = None) -> Callable[[list[str]], np.ndarray]:
    if model.startswith("hash:"):
        try:
            dim = int(model.split(":", 1)[1])
        except ValueError as exc:
            raise EncoderError(f"bad hash encoder spec {model!r}") from exc
        return make_hash_encoder(dim)
    return make_transformer_encoder(model, device)


def _batches(items: list, size: int) -> Iterator[list]:
    for lo in range(0, len(items), size):
        yield items[lo:lo + size]


def _atomic_write(path: Path, payload: bytes) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(ids: list[str], data: np.ndarray, path: Path) -> None:
    """EMB1 binary plus `<path>.ids.jsonl` sidecar."""
    rows, dim = data.shape
    if rows != len(ids):
        raise ValueError(f"{rows} rows vs {len(ids)} ids")
    payload = _HEADER.pack(MAGIC, dim, rows)
    payload += np.ascontiguousarray(data, dtype="<f4").tobytes()
    _atomic_write(path, payload)
    lines = "\n".join(
        json.dumps({"row": i, "sentence_id": sid}, sort_keys=True)
        for i, sid in enumerate(ids)
    )
    _atomic_write(Path(str(path) + ".ids.jsonl"), (lines + "\n").encode("utf-8"))


def export(job: EmbedJob) -> tuple[int, int]:
    """Run the job; returns (row count, dim)."""
    pairs = read_sentences(job.corpus)
    encode = make_encoder(job.model, job.device)
    ids = [sid for sid, _ in pairs]
    texts = [text for _, text in pairs]

    blocks = []
    for batch in _batches(texts, job.batch_size):
        block = encode(batch)
        if block.ndim != 2 or block.shape[0] != len(batch):
            raise EncoderError(f"encoder returned shape {block.shape} for {len(batch)} texts")
        blocks.append(block)
    data = np.vstack(blocks)
    if not np.isfinite(data).all():
        raise EncoderError("encoder produced non-finite values")
    dim = data.shape[1]
    if job.expect_dim is not None and dim != job.expect_dim:
        raise EncoderError(f"dim mismatch: encoder dim {dim}, expected {job.expect_dim}")
    write_table(ids, data, job.out)
    return len(ids), dim
