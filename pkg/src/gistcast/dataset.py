"""Assembly of training samples from collections, embeddings, and labels.

A sample pairs one (country, month, fold) pseudo-collection's article
embeddings with the three targets of the FOLLOWING month (lead time 1).
Keys whose next-month labels are absent or incomplete are skipped with a
warning, never imputed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .bootstrap import PseudoCollection
from .embeddings import EmbeddingTable, embed_collection
from .panel import CountryMonthKey, LabelRow, Split, SplitAssignment

logger = logging.getLogger(__name__)


@dataclass
class PanelSample:
    """One training unit: article embeddings plus next-month targets."""

    key: CountryMonthKey
    fold: int
    embeddings: np.ndarray  # (m, dim) float64
    targets: np.ndarray     # (3,) [fci, food_price, social_events], raw units

    @property
    def country(self) -> str:
        return self.key.country


def assemble_samples(
    collections: Sequence[PseudoCollection],
    table: EmbeddingTable,
    labels: Sequence[LabelRow],
    lead: int = 1,
) -> list[PanelSample]:
    """Build samples in canonical (key, fold) order; report skipped keys."""
    label_by_key = {row.key: row for row in labels}
    samples: list[PanelSample] = []
    skipped: set[CountryMonthKey] = set()
    for coll in sorted(collections, key=lambda c: (c.key, c.fold)):
        target_key = CountryMonthKey(coll.key.country, coll.key.month.shift(lead))
        row = label_by_key.get(target_key)
        if row is None or not row.complete:
            skipped.add(coll.key)
            continue
        emb = embed_collection(coll, table)
        samples.append(PanelSample(
            key=coll.key,
            fold=coll.fold,
            embeddings=emb.matrix,
            targets=np.array([row.fci, row.food_price, row.social_events], dtype=np.float64),
        ))
    for key in sorted(skipped):
        logger.warning("skipping %s: next-month label missing or incomplete", key)
    return samples


def split_samples(
    samples: Sequence[PanelSample],
    assignment: SplitAssignment,
) -> dict[Split, list[PanelSample]]:
    out: dict[Split, list[PanelSample]] = {split: [] for split in Split}
    for sample in samples:
        out[assignment.split_of(sample.key)].append(sample)
    return out
