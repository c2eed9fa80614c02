"""Interpretable gist extraction from attention traces.

Article importance is the attention weight times the zero-centered
min-max-normalized prediction; each article's importance is split uniformly
over its n drawn sentences, a sentence drawn into several pseudo-articles
sums its per-occurrence scores, and the global top/bottom fraction by score
becomes the high/low gist sets.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from ._util import atomic_write_text
from .bootstrap import PseudoCollection
from .panel import CountryMonthKey

DEFAULT_FRACTION = 0.05


class Side(Enum):
    HIGH = "high"
    LOW = "low"


@dataclass(frozen=True)
class Occurrence:
    """Where a sentence score came from: collection, fold, article slot."""

    key: CountryMonthKey
    fold: int
    article_index: int


@dataclass
class ScoredSentence:
    """A sentence's aggregated importance with its strongest provenance."""

    sentence_id: str
    text: str
    w_s: float
    source: Occurrence
    article_weight: float
    prediction: float


@dataclass
class GistRecord:
    sentence_id: str
    text: str
    w_s: float
    source: Occurrence
    article_weight: float
    prediction: float
    side: Side


@dataclass
class GistReport:
    high: list[GistRecord]
    low: list[GistRecord]
    fraction: float
    population_size: int


def normalize_predictions(preds: Sequence[float], zero_centered: bool = True) -> np.ndarray:
    """Min-max map of predictions onto [-1, 1] (or [0, 1] when not centered).

    A degenerate population (max == min) maps to all zeros (or 0.5).
    """
    preds = np.asarray(preds, dtype=np.float64)
    if preds.size < 1:
        raise ValueError("need at least one prediction")
    lo, hi = float(preds.min()), float(preds.max())
    if hi == lo:
        unit = np.zeros_like(preds) + 0.5
    else:
        unit = (preds - lo) / (hi - lo)
    return 2.0 * unit - 1.0 if zero_centered else unit


def article_importance(attn_w: Sequence[float], y_norm: float) -> np.ndarray:
    """Signed per-article importance: attention weight times normalized prediction."""
    attn_w = np.asarray(attn_w, dtype=np.float64)
    if not (np.isfinite(attn_w).all() and math.isfinite(y_norm)):
        raise ValueError("non-finite importance inputs")
    return attn_w * y_norm


def sentence_scores(
    collection: PseudoCollection,
    importance: Sequence[float],
) -> dict[str, float]:
    """Uniform split of each article's importance over its drawn sentences.

    Returns per-sentence totals: a sentence occurring in several articles (or
    several times within one) accumulates the sum of its occurrence scores.
    """
    importance = np.asarray(importance, dtype=np.float64)
    if importance.shape != (len(collection.articles),):
        raise ValueError(
            f"importance length {importance.shape} != article count {len(collection.articles)}"
        )
    totals: dict[str, float] = {}
    for imp, article in zip(importance, collection.articles):
        share = float(imp) / len(article.sentence_ids)
        for sid in article.sentence_ids:
            totals[sid] = totals.get(sid, 0.0) + share
    return totals


@dataclass
class CollectionTrace:
    """Attention weights and crisis-index prediction for one collection."""

    collection: PseudoCollection
    attn_w: np.ndarray
    prediction: float


def score_sentences(
    traces: Sequence[CollectionTrace],
    texts: Mapping[str, str],
    zero_centered: bool = True,
) -> dict[str, ScoredSentence]:
    """Aggregate sentence scores across collections.

    Predictions are min-max normalized over the full trace population; each
    sentence keeps the occurrence with the largest absolute contribution as
    its representative provenance.
    """
    if not traces:
        raise ValueError("no traces to score")
    y_norm = normalize_predictions([t.prediction for t in traces], zero_centered)
    scored: dict[str, ScoredSentence] = {}
    best_contrib: dict[str, float] = {}
    for trace, y in zip(traces, y_norm):
        importance = article_importance(trace.attn_w, float(y))
        coll = trace.collection
        for art_idx, (imp, article) in enumerate(zip(importance, coll.articles)):
            share = float(imp) / len(article.sentence_ids)
            for sid in article.sentence_ids:
                entry = scored.get(sid)
                if entry is None:
                    scored[sid] = ScoredSentence(
                        sentence_id=sid,
                        text=texts.get(sid, ""),
                        w_s=share,
                        source=Occurrence(coll.key, coll.fold, art_idx),
                        article_weight=float(imp),
                        prediction=trace.prediction,
                    )
                    best_contrib[sid] = abs(share)
                else:
                    entry.w_s += share
                    if abs(share) > best_contrib[sid]:
                        best_contrib[sid] = abs(share)
                        entry.source = Occurrence(coll.key, coll.fold, art_idx)
                        entry.article_weight = float(imp)
                        entry.prediction = trace.prediction
    return scored


def extract_gists(
    scored: Mapping[str, ScoredSentence],
    fraction: float = DEFAULT_FRACTION,
) -> GistReport:
    """Top and bottom `fraction` of sentences by score, ties by sentence id."""
    if not 0.0 < fraction <= 0.5:
        raise ValueError(f"fraction must be in (0, 0.5], got {fraction}")
    if not scored:
        raise ValueError("empty sentence population")
    population = len(scored)
    count = math.ceil(fraction * population)

    def record(entry: ScoredSentence, side: Side) -> GistRecord:
        return GistRecord(
            sentence_id=entry.sentence_id,
            text=entry.text,
            w_s=entry.w_s,
            source=entry.source,
            article_weight=entry.article_weight,
            prediction=entry.prediction,
            side=side,
        )

    by_high = sorted(scored.values(), key=lambda e: (-e.w_s, e.sentence_id))
    by_low = sorted(scored.values(), key=lambda e: (e.w_s, e.sentence_id))
    return GistReport(
        high=[record(e, Side.HIGH) for e in by_high[:count]],
        low=[record(e, Side.LOW) for e in by_low[:count]],
        fraction=fraction,
        population_size=population,
    )


def save_gist_tsv(report: GistReport, path: str | Path, meta: str | None = None) -> None:
    buf = io.StringIO()
    if meta:
        buf.write(meta + "\n")
    buf.write("rank\tside\tw_s\tcountry\tmonth\tfold\tsentence_id\ttext\n")
    for side, records in ((Side.HIGH, report.high), (Side.LOW, report.low)):
        for rank, rec in enumerate(records, start=1):
            text = rec.text.replace("\t", " ").replace("\n", " ")
            buf.write(
                f"{rank}\t{side.value}\t{float(rec.w_s)!r}\t{rec.source.key.country}\t"
                f"{rec.source.key.month}\t{rec.source.fold}\t{rec.sentence_id}\t{text}\n"
            )
    atomic_write_text(path, buf.getvalue())


def save_gist_summary(
    report: GistReport,
    scored: Mapping[str, ScoredSentence],
    path: str | Path,
    meta: dict | None = None,
) -> None:
    scores = np.array(sorted(e.w_s for e in scored.values()))
    quantiles = {
        f"q{int(q * 100):02d}": float(np.quantile(scores, q))
        for q in (0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0)
    }
    obj = {
        "fraction": report.fraction,
        "population_size": report.population_size,
        "selected_per_side": len(report.high),
        "score_quantiles": quantiles,
    }
    if meta is not None:
        obj["meta"] = meta
    atomic_write_text(path, json.dumps(obj, sort_keys=True, indent=1) + "\n")
