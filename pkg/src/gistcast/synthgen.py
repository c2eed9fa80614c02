"""Deterministic synthetic-data generator with planted structure.

Each country-month draws a latent u ~ Uniform[-1, 1]. A fixed fraction of
that month's articles are informative: their sentences embed as
u * signal_direction plus an informativeness marker along an orthogonal
direction, plus noise; all other sentences are pure noise. The marker's
amplitude is (1 - signal_fraction), so it vanishes exactly when every
sentence is informative and there is nothing left to distinguish. The
crisis index of the FOLLOWING month is 3 + 1.5 u, so text at month t is
predictive of the label at t+1 exactly as samples are assembled. Price and
social targets are affine images of a task_correlation-weighted mix of u
and independent noise. Sentence text comes from two disjoint topic word
sets keyed to sign(u), giving topic and gist analyses a recoverable ground
truth. Traditional risk factors are independent noise, so any predictive
signal lives only in the text.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
import numpy as np

from ._util import atomic_write_text, config_hash, meta_comment, subseed
from .baseline import TraditionalRow, save_traditional
from .embeddings import EmbeddingTable, write_table
from .panel import (
    CorpusArticle,
    CountryMonthKey,
    LabelRow,
    Month,
    save_corpus,
    save_labels,
)

DEFAULT_COUNTRIES = ("UG", "GN", "MW", "ML", "NE", "NG", "SN", "BF", "CD")
DEFAULT_START = Month(2017, 3)

TOPIC_A_WORDS = tuple(f"harvest{i:02d}" for i in range(25))
TOPIC_B_WORDS = tuple(f"turmoil{i:02d}" for i in range(25))


@dataclass
class SynthConfig:
    countries: int = 9
    months: int = 44
    articles_per_month: int = 10
    sentences_per_article: int = 6
    dim: int = 16
    signal_fraction: float = 0.5
    noise_sigma: float = 0.1
    task_correlation: float = 0.8
    seed: int = 0
    words_per_sentence: int = 8
    start: Month = DEFAULT_START

    def __post_init__(self) -> None:
        for name in ("countries", "months", "articles_per_month",
                     "sentences_per_article", "words_per_sentence"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.dim < 2:
            raise ValueError(f"dim must be >= 2, got {self.dim}")
        if not 0.0 < self.signal_fraction <= 1.0:
            raise ValueError("signal_fraction must be in (0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if not 0.0 <= self.task_correlation <= 1.0:
            raise ValueError("task_correlation must be in [0, 1]")

    def country_codes(self) -> tuple[str, ...]:
        if self.countries <= len(DEFAULT_COUNTRIES):
            return DEFAULT_COUNTRIES[: self.countries]
        return tuple(f"C{i:02d}" for i in range(self.countries))

    def to_json(self) -> dict:
        return {
            "countries": self.countries, "months": self.months,
            "articles_per_month": self.articles_per_month,
            "sentences_per_article": self.sentences_per_article,
            "dim": self.dim, "signal_fraction": self.signal_fraction,
            "noise_sigma": self.noise_sigma,
            "task_correlation": self.task_correlation, "seed": self.seed,
            "words_per_sentence": self.words_per_sentence,
            "start": str(self.start),
        }


@dataclass
class SynthTruth:
    signal_direction: np.ndarray
    marker_direction: np.ndarray
    informative_article_ids: set[str]
    true_latent: dict[CountryMonthKey, float]


@dataclass
class SynthData:
    corpus: list[CorpusArticle]
    table: EmbeddingTable
    labels: list[LabelRow]
    traditional: list[TraditionalRow]
    truth: SynthTruth
    config: SynthConfig

    def write(self, out_dir: str | Path) -> dict[str, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        meta = {"config_hash": config_hash(self.config.to_json()), "seed": self.config.seed}
        line_meta = meta_comment(self.config.to_json(), self.config.seed)
        paths = {
            "corpus": out / "corpus.jsonl",
            "embeddings": out / "embeddings.bin",
            "labels": out / "labels.csv",
            "traditional": out / "traditional.csv",
            "truth": out / "truth.json",
        }
        save_corpus(self.corpus, paths["corpus"], meta=meta)
        write_table(self.table, paths["embeddings"])
        save_labels(self.labels, paths["labels"], meta=line_meta)
        save_traditional(self.traditional, paths["traditional"], meta=line_meta)
        atomic_write_text(paths["truth"], json.dumps({
            "meta": meta,
            "signal_direction": self.truth.signal_direction.tolist(),
            "marker_direction": self.truth.marker_direction.tolist(),
            "informative_article_ids": sorted(self.truth.informative_article_ids),
            "true_latent": {str(k): v for k, v in sorted(self.truth.true_latent.items())},
        }, sort_keys=True) + "\n")
        return paths


def _clamp(value: float, lo: float, hi: float) -> float:
    return min(max(value, lo), hi)


def generate(cfg: SynthConfig) -> SynthData:
    """Build the full synthetic artifact set in memory, deterministic in seed."""
    rng = np.random.default_rng(subseed(cfg.seed, "synthgen"))
    direction = rng.standard_normal(cfg.dim)
    direction /= np.linalg.norm(direction)
    marker = rng.standard_normal(cfg.dim)
    marker -= (marker @ direction) * direction
    marker /= np.linalg.norm(marker)
    marker_gain = 1.0 - cfg.signal_fraction

    codes = cfg.country_codes()
    months = [cfg.start.shift(i) for i in range(cfg.months)]
    n_informative = max(1, round(cfg.signal_fraction * cfg.articles_per_month))

    corpus: list[CorpusArticle] = []
    ids: list[str] = []
    vectors: list[np.ndarray] = []
    labels: list[LabelRow] = []
    traditional: list[TraditionalRow] = []
    informative: set[str] = set()
    latent: dict[CountryMonthKey, float] = {}

    # u is drawn per text month plus one lead-in value per country so that
    # every label month (text months shifted by one) has a generator.
    for country in codes:
        crng = np.random.default_rng(subseed(cfg.seed, "country", country))
        u_series = crng.uniform(-1.0, 1.0, size=cfg.months + 1)  # u[-1], u[0..months-1]
        eps_price = crng.uniform(-1.0, 1.0, size=cfg.months + 1)
        eps_social = crng.uniform(-1.0, 1.0, size=cfg.months + 1)
        invariant = {
            "district_size": float(crng.uniform(1e3, 1e5)),
            "cropland_share": float(crng.uniform(0.05, 0.8)),
            "pasture_share": float(crng.uniform(0.05, 0.2)),
            "population": float(crng.uniform(1e6, 5e7)),
        }

        for t in range(cfg.months + 1):
            # label months run one past the text window
            label_month = cfg.start.shift(t)
            u_prev = u_series[t]  # u of the preceding text month
            rho = cfg.task_correlation
            mix_price = rho * u_prev + (1.0 - rho) * eps_price[t]
            mix_social = rho * u_prev + (1.0 - rho) * eps_social[t]
            key = CountryMonthKey(country, label_month)
            labels.append(LabelRow(
                key=key,
                fci=_clamp(3.0 + 1.5 * _clamp(float(u_prev), -1.0, 1.0), 1.0, 5.0),
                food_price=float(100.0 + 20.0 * mix_price),
                social_events=float(50.0 + 30.0 * mix_social),
            ))
            traditional.append(TraditionalRow(
                key=key,
                rainfall=float(crng.uniform(0.0, 200.0)),
                ndvi=float(crng.uniform(0.1, 0.9)),
                food_price_index=float(crng.uniform(80.0, 120.0)),
                conflict_events=float(crng.integers(0, 40)),
                terrain_ruggedness=float(crng.uniform(0.0, 5.0)),
                **invariant,
            ))

        for t, month in enumerate(months):
            key = CountryMonthKey(country, month)
            u = float(u_series[t + 1])
            latent[key] = u
            # turmoil vocabulary on high-crisis months, harvest on low
            words = TOPIC_B_WORDS if u >= 0 else TOPIC_A_WORDS
            mrng = np.random.default_rng(
                subseed(cfg.seed, "text", country, month.year, month.month)
            )
            for a in range(cfg.articles_per_month):
                article_id = f"{country}-{month}-a{a:03d}"
                is_informative = a < n_informative
                if is_informative:
                    informative.add(article_id)
                sentences = []
                for s in range(cfg.sentences_per_article):
                    picks = mrng.integers(0, len(words), size=cfg.words_per_sentence)
                    sentences.append(" ".join(words[w] for w in picks))
                    noise = cfg.noise_sigma * mrng.standard_normal(cfg.dim)
                    vec = u * direction + marker_gain * marker + noise \
                        if is_informative else noise
                    ids.append(f"{article_id}#{s}")
                    vectors.append(vec)
                corpus.append(CorpusArticle(article_id, key, tuple(sentences)))

    table = EmbeddingTable(dim=cfg.dim, ids=ids,
                           data=np.array(vectors, dtype=np.float32))
    truth = SynthTruth(signal_direction=direction,
                       marker_direction=marker,
                       informative_article_ids=informative,
                       true_latent=latent)
    return SynthData(corpus=corpus, table=table, labels=labels,
                     traditional=traditional, truth=truth, config=cfg)
