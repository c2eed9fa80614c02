"""Shared plumbing: atomic file writes, seeding, config hashing, thread caps."""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path
from typing import Any


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write `text` to `path` via a temp file and atomic rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path: str | Path, payload: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def subseed(master: int, *parts: object) -> int:
    """Derive a stable 64-bit sub-seed from a master seed and context parts.

    Uses SHA-256 of the canonical string form, so the stream assigned to a
    (country, month, fold) unit is reproducible in isolation and independent
    of generation order.
    """
    token = "|".join([str(int(master))] + [str(p) for p in parts])
    digest = hashlib.sha256(token.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def config_hash(config: Any) -> str:
    """Short stable hash of a JSON-serializable config object."""
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


def thread_count() -> int:
    """Parallelism cap from GISTCAST_THREADS (default 1, i.e. sequential)."""
    raw = os.environ.get("GISTCAST_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, n)


def meta_comment(config: Any, seed: int | None) -> str:
    """One-line `#` comment embedding the config hash and seed in text outputs."""
    return f"# gistcast config_hash={config_hash(config)} seed={seed}"
