"""Bootstrap data augmentation.

Each observed country-month article collection becomes K pseudo-collections
of m pseudo-articles, every pseudo-article holding n sentences resampled
uniformly with replacement from the month's sentence pool. Sampling is at
sentence level, ignoring article boundaries, and each (key, fold) unit runs
on its own sub-seeded RNG so any collection is reproducible in isolation.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from ._util import atomic_write_text, subseed, thread_count
from .panel import CorpusArticle, CountryMonthKey, Month

logger = logging.getLogger(__name__)

DEFAULT_M = 85
DEFAULT_N = 21
DEFAULT_K = 10


@dataclass(frozen=True)
class PoolEntry:
    sentence_id: str
    article_id: str
    text: str


@dataclass(frozen=True)
class SentencePool:
    """All sentences of one country-month, in (article_id, index) order."""

    key: CountryMonthKey
    entries: tuple[PoolEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class PseudoArticle:
    """n resampled sentence ids; repeats are legal bootstrap draws."""

    sentence_ids: tuple[str, ...]


@dataclass(frozen=True)
class PseudoCollection:
    """One bootstrap fold of a country-month: m pseudo-articles."""

    key: CountryMonthKey
    fold: int
    articles: tuple[PseudoArticle, ...]


@dataclass
class AugmentResult:
    collections: list[PseudoCollection]
    skipped: list[CountryMonthKey]

    @property
    def pseudo_article_count(self) -> int:
        return sum(len(c.articles) for c in self.collections)


def sentence_id(article_id: str, index: int) -> str:
    return f"{article_id}#{index}"


def build_pool(articles: Sequence[CorpusArticle]) -> SentencePool:
    """Collect every sentence of a month's articles into one ordered pool."""
    if not articles:
        raise ValueError("empty pool: no articles")
    keys = {a.key for a in articles}
    if len(keys) != 1:
        raise ValueError(f"articles span multiple keys: {sorted(map(str, keys))}")
    entries = [
        PoolEntry(sentence_id(a.article_id, i), a.article_id, text)
        for a in sorted(articles, key=lambda a: a.article_id)
        for i, text in enumerate(a.sentences)
    ]
    if not entries:
        raise ValueError("empty pool")
    return SentencePool(key=articles[0].key, entries=tuple(entries))


def build_pools(corpus: Sequence[CorpusArticle]) -> dict[CountryMonthKey, SentencePool]:
    by_key: dict[CountryMonthKey, list[CorpusArticle]] = {}
    for article in corpus:
        by_key.setdefault(article.key, []).append(article)
    return {key: build_pool(group) for key, group in sorted(by_key.items())}


def sample_pseudo_article(pool: SentencePool, n: int, rng: np.random.Generator) -> PseudoArticle:
    """Draw n sentence ids uniformly i.i.d. with replacement from the pool."""
    if len(pool) == 0:
        raise ValueError(f"empty pool at {pool.key}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    picks = rng.integers(0, len(pool.entries), size=n)
    return PseudoArticle(tuple(pool.entries[i].sentence_id for i in picks))


def _sample_collection(pool: SentencePool, fold: int, m: int, n: int, seed: int) -> PseudoCollection:
    key = pool.key
    rng = np.random.default_rng(
        subseed(seed, key.country, key.month.year, key.month.month, fold)
    )
    articles = tuple(sample_pseudo_article(pool, n, rng) for _ in range(m))
    return PseudoCollection(key=key, fold=fold, articles=articles)


def augment(
    pools: dict[CountryMonthKey, SentencePool],
    m: int = DEFAULT_M,
    n: int = DEFAULT_N,
    k: int = DEFAULT_K,
    seed: int = 0,
) -> AugmentResult:
    """K pseudo-collections per non-empty pool, in canonical (key, fold) order.

    Empty pools are skipped and reported so downstream sample counts stay
    auditable. Units may be generated in parallel (GISTCAST_THREADS); the
    per-unit sub-seeding makes the output identical either way.
    """
    if min(m, n, k) < 1:
        raise ValueError(f"m, n, K must all be >= 1, got {(m, n, k)}")
    skipped = sorted(key for key, pool in pools.items() if len(pool) == 0)
    for key in skipped:
        logger.warning("skipping empty pool %s", key)
    units = [
        (pools[key], fold)
        for key in sorted(k2 for k2, pool in pools.items() if len(pool) > 0)
        for fold in range(k)
    ]
    workers = thread_count()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool_exec:
            collections = list(
                pool_exec.map(lambda u: _sample_collection(u[0], u[1], m, n, seed), units)
            )
    else:
        collections = [_sample_collection(pool, fold, m, n, seed) for pool, fold in units]
    collections.sort(key=lambda c: (c.key, c.fold))
    return AugmentResult(collections=collections, skipped=skipped)


def corpus_medians(corpus: Sequence[CorpusArticle]) -> tuple[int, int]:
    """(median sentences per article, median articles per key), lower-median."""
    if not corpus:
        raise ValueError("empty corpus")
    sentence_counts = sorted(len(a.sentences) for a in corpus)
    per_key: dict[CountryMonthKey, int] = {}
    for article in corpus:
        per_key[article.key] = per_key.get(article.key, 0) + 1
    article_counts = sorted(per_key.values())

    def lower_median(values: list[int]) -> int:
        return values[(len(values) - 1) // 2]

    return lower_median(sentence_counts), lower_median(article_counts)


def save_manifest(
    result: AugmentResult | Iterable[PseudoCollection],
    path: str | Path,
    meta: dict | None = None,
) -> None:
    """Write pseudo-collections as manifest JSONL."""
    collections = result.collections if isinstance(result, AugmentResult) else list(result)
    lines = []
    if meta is not None:
        lines.append(json.dumps({"meta": meta}, sort_keys=True))
    for coll in collections:
        lines.append(json.dumps({
            "country": coll.key.country,
            "month": str(coll.key.month),
            "fold": coll.fold,
            "articles": [list(a.sentence_ids) for a in coll.articles],
        }, sort_keys=True))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_manifest(path: str | Path) -> list[PseudoCollection]:
    collections: list[PseudoCollection] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "meta" in obj and "country" not in obj:
                continue
            try:
                collections.append(PseudoCollection(
                    key=CountryMonthKey(str(obj["country"]), Month.parse(obj["month"])),
                    fold=int(obj["fold"]),
                    articles=tuple(PseudoArticle(tuple(ids)) for ids in obj["articles"]),
                ))
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path} line {line_no}: {exc}") from exc
    return collections
