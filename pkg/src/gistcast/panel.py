"""Spatiotemporal panel domain model.

Countries, months, label rows (interpolated food-crisis index plus food-price
and social-insecurity targets), corpus records, and the chronological
train/dev/test split. All types are immutable values; loading is
single-threaded and validated row by row.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

from ._util import atomic_write_text

logger = logging.getLogger(__name__)

FCI_MIN = 1.0
FCI_MAX = 5.0

LABEL_HEADER = ["country", "month", "fci", "food_price", "social_events"]
IPC_HEADER = ["country", "month", "phase"]


@dataclass(frozen=True, order=True)
class Month:
    """Calendar month, totally ordered by (year, month)."""

    year: int
    month: int

    def __post_init__(self) -> None:
        if not 1 <= self.month <= 12:
            raise ValueError(f"month out of range 1..12: {self.month}")

    @property
    def index(self) -> int:
        """Months since year 0, for affine arithmetic on the month axis."""
        return self.year * 12 + (self.month - 1)

    @classmethod
    def from_index(cls, idx: int) -> "Month":
        return cls(idx // 12, idx % 12 + 1)

    @classmethod
    def parse(cls, text: str) -> "Month":
        try:
            y, m = text.strip().split("-")
            return cls(int(y), int(m))
        except (ValueError, AttributeError) as exc:
            raise ValueError(f"bad month {text!r}, expected YYYY-MM") from exc

    def shift(self, months: int) -> "Month":
        return Month.from_index(self.index + months)

    def __str__(self) -> str:
        return f"{self.year:04d}-{self.month:02d}"


@dataclass(frozen=True, order=True)
class CountryMonthKey:
    """One (country, month) panel cell."""

    country: str
    month: Month

    def __str__(self) -> str:
        return f"{self.country}/{self.month}"


@dataclass(frozen=True)
class LabelRow:
    """Targets observed for one panel cell.

    `food_price` / `social_events` may be None for months where those series
    are missing; such cells are ineligible as training samples and are skipped
    with a warning rather than imputed.
    """

    key: CountryMonthKey
    fci: float
    food_price: float | None
    social_events: float | None

    def __post_init__(self) -> None:
        if not (FCI_MIN <= self.fci <= FCI_MAX):
            raise ValueError(f"fci out of [1,5]: {self.fci} at {self.key}")
        for name, value in (("food_price", self.food_price), ("social_events", self.social_events)):
            if value is not None:
                if not math.isfinite(value):
                    raise ValueError(f"{name} not finite at {self.key}")
                if value < 0:
                    raise ValueError(f"{name} negative at {self.key}")

    @property
    def complete(self) -> bool:
        return self.food_price is not None and self.social_events is not None


@dataclass(frozen=True)
class QuarterlyIpcSeries:
    """Sparse anchor series of IPC phase values for one country."""

    country: str
    points: tuple[tuple[Month, float], ...]

    def __post_init__(self) -> None:
        for _, value in self.points:
            if not (FCI_MIN <= value <= FCI_MAX):
                raise ValueError(f"phase value out of [1,5]: {value}")


@dataclass(frozen=True)
class CorpusArticle:
    """One news article: id, panel cell, ordered non-empty sentences."""

    article_id: str
    key: CountryMonthKey
    sentences: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.sentences:
            raise ValueError(f"article {self.article_id}: no sentences")
        if any(not s for s in self.sentences):
            raise ValueError(f"article {self.article_id}: empty sentence")


class Split(Enum):
    TRAIN = "train"
    DEV = "dev"
    TEST = "test"


# Chronological split defaults. The panel window that reproduces the reference
# sample counts (2340/720/900 at 9 countries x 10 folds) is Mar 2017..Oct 2020
# with training through April 2019 and development May..December 2019.
DEFAULT_TRAIN_END = Month(2019, 4)
DEFAULT_DEV_END = Month(2019, 12)


@dataclass(frozen=True)
class SplitAssignment:
    """Disjoint exhaustive chronological partition of panel keys."""

    train_end: Month
    dev_end: Month
    assignment: dict[CountryMonthKey, Split]
    sample_counts: dict[Split, int]

    def split_of(self, key: CountryMonthKey) -> Split:
        return self.assignment[key]

    def keys_in(self, split: Split) -> list[CountryMonthKey]:
        return sorted(k for k, s in self.assignment.items() if s is split)


def interpolate_ipc(
    series: QuarterlyIpcSeries,
    start: Month | None = None,
    end: Month | None = None,
) -> list[tuple[Month, float]]:
    """Monthly food-crisis index from sparse quarterly anchors.

    Exact at anchor months, affine in month index between consecutive
    anchors, and held constant before the first / after the last anchor.
    `start`/`end` default to the anchor span.
    """
    if not series.points:
        raise ValueError("no anchors")
    months = [p[0] for p in series.points]
    for a, b in zip(months, months[1:]):
        if not a < b:
            raise ValueError("unsorted series")

    start = start if start is not None else months[0]
    end = end if end is not None else months[-1]
    if end < start:
        raise ValueError(f"end {end} before start {start}")

    anchors = [(m.index, v) for m, v in series.points]
    out: list[tuple[Month, float]] = []
    for idx in range(start.index, end.index + 1):
        if idx <= anchors[0][0]:
            value = anchors[0][1]
        elif idx >= anchors[-1][0]:
            value = anchors[-1][1]
        else:
            # locate the segment [lo, hi] containing idx
            pos = 0
            while anchors[pos + 1][0] < idx:
                pos += 1
            (lo_i, lo_v), (hi_i, hi_v) = anchors[pos], anchors[pos + 1]
            if idx == hi_i:
                value = hi_v
            else:
                t = (idx - lo_i) / (hi_i - lo_i)
                value = lo_v + t * (hi_v - lo_v)
        out.append((Month.from_index(idx), float(value)))
    return out


def make_splits(
    keys: Sequence[CountryMonthKey],
    folds: int,
    train_end: Month = DEFAULT_TRAIN_END,
    dev_end: Month = DEFAULT_DEV_END,
) -> SplitAssignment:
    """Assign every key to train/dev/test by month; counts are keys x folds."""
    if folds < 1:
        raise ValueError(f"folds must be >= 1, got {folds}")
    if dev_end < train_end:
        raise ValueError(f"dev_end {dev_end} before train_end {train_end}")
    seen: set[CountryMonthKey] = set()
    for key in keys:
        if key in seen:
            raise ValueError(f"duplicate key {key}")
        seen.add(key)
    _check_contiguity(keys)

    assignment: dict[CountryMonthKey, Split] = {}
    for key in keys:
        if key.month <= train_end:
            assignment[key] = Split.TRAIN
        elif key.month <= dev_end:
            assignment[key] = Split.DEV
        else:
            assignment[key] = Split.TEST
    counts = {
        split: folds * sum(1 for s in assignment.values() if s is split)
        for split in Split
    }
    return SplitAssignment(train_end, dev_end, assignment, counts)


def _check_contiguity(keys: Iterable[CountryMonthKey]) -> None:
    by_country: dict[str, list[int]] = {}
    for key in keys:
        by_country.setdefault(key.country, []).append(key.month.index)
    for country, idxs in by_country.items():
        idxs.sort()
        if idxs[-1] - idxs[0] + 1 != len(idxs):
            raise ValueError(f"non-contiguous month range for {country}")


def _iter_csv_rows(path: str | Path, header: list[str]):
    """Yield (line_number, row_dict), skipping `#` metadata comments."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        lines = fh.read().splitlines()
    rows = [(i + 1, line) for i, line in enumerate(lines) if line and not line.startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty file")
    first_no, first = rows[0]
    got = next(csv.reader([first]))
    if got != header:
        raise ValueError(f"{path} line {first_no}: bad header {got!r}, expected {header!r}")
    for line_no, line in rows[1:]:
        cells = next(csv.reader([line]))
        if len(cells) != len(header):
            raise ValueError(f"{path} line {line_no}: expected {len(header)} fields, got {len(cells)}")
        yield line_no, dict(zip(header, cells))


def load_labels(path: str | Path) -> list[LabelRow]:
    """Parse and validate a labels CSV; duplicate keys are rejected."""
    rows: list[LabelRow] = []
    seen: set[CountryMonthKey] = set()
    for line_no, cells in _iter_csv_rows(path, LABEL_HEADER):
        try:
            key = CountryMonthKey(cells["country"], Month.parse(cells["month"]))
            fci = float(cells["fci"])
            price = float(cells["food_price"]) if cells["food_price"] != "" else None
            social = float(cells["social_events"]) if cells["social_events"] != "" else None
            row = LabelRow(key, fci, price, social)
        except ValueError as exc:
            raise ValueError(f"{path} line {line_no}: {exc}") from exc
        if row.key in seen:
            raise ValueError(f"{path} line {line_no}: duplicate label row for {row.key}")
        seen.add(row.key)
        if not row.complete:
            logger.warning("label row %s is missing food_price/social_events; "
                           "ineligible as a training sample", row.key)
        rows.append(row)
    return rows


def save_labels(rows: Iterable[LabelRow], path: str | Path, meta: str | None = None) -> None:
    buf = io.StringIO()
    if meta:
        buf.write(meta + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(LABEL_HEADER)
    for row in rows:
        writer.writerow([
            row.key.country,
            str(row.key.month),
            repr(float(row.fci)),
            "" if row.food_price is None else repr(float(row.food_price)),
            "" if row.social_events is None else repr(float(row.social_events)),
        ])
    atomic_write_text(path, buf.getvalue())


def load_ipc(path: str | Path) -> list[QuarterlyIpcSeries]:
    """Parse a quarterly IPC anchor CSV into per-country series."""
    points: dict[str, list[tuple[Month, float]]] = {}
    for line_no, cells in _iter_csv_rows(path, IPC_HEADER):
        try:
            month = Month.parse(cells["month"])
            phase = float(cells["phase"])
        except ValueError as exc:
            raise ValueError(f"{path} line {line_no}: {exc}") from exc
        points.setdefault(cells["country"], []).append((month, phase))
    out = []
    for country in sorted(points):
        series_points = points[country]
        for a, b in zip(series_points, series_points[1:]):
            if not a[0] < b[0]:
                raise ValueError(f"{path}: unsorted series for {country}")
        out.append(QuarterlyIpcSeries(country, tuple(series_points)))
    return out


def load_corpus(path: str | Path) -> list[CorpusArticle]:
    """Parse a corpus JSONL file; article ids must be unique corpus-wide."""
    articles: list[CorpusArticle] = []
    seen_ids: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path} line {line_no}: bad JSON: {exc}") from exc
            if "meta" in obj and "article_id" not in obj:
                continue
            try:
                article = CorpusArticle(
                    article_id=str(obj["article_id"]),
                    key=CountryMonthKey(str(obj["country"]), Month.parse(obj["month"])),
                    sentences=tuple(obj["sentences"]),
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path} line {line_no}: {exc}") from exc
            if article.article_id in seen_ids:
                raise ValueError(f"{path} line {line_no}: duplicate article_id {article.article_id}")
            seen_ids.add(article.article_id)
            articles.append(article)
    return articles


def save_corpus(articles: Iterable[CorpusArticle], path: str | Path, meta: dict | None = None) -> None:
    lines = []
    if meta is not None:
        lines.append(json.dumps({"meta": meta}, sort_keys=True))
    for article in articles:
        lines.append(json.dumps({
            "article_id": article.article_id,
            "country": article.key.country,
            "month": str(article.key.month),
            "sentences": list(article.sentences),
        }, sort_keys=True))
    atomic_write_text(path, "\n".join(lines) + "\n")
