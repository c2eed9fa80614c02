"""Panel autoregressive distributed-lag baseline.

One pooled ridge regression across countries: self-lagged crisis-index
targets (lags 3..8), lagged time-varying traditional and keyword-frequency
features, time-invariant features, and an intercept. Columns are z-scored
internally by training statistics (intercept exempt and unpenalized), and
the system (X'X + D) beta = X'y is solved by Cholesky factorization.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ._util import atomic_write_text
from .panel import CorpusArticle, CountryMonthKey, LabelRow, Month, _iter_csv_rows

logger = logging.getLogger(__name__)

LAG_MIN = 3
LAG_MAX = 8
DEFAULT_RIDGE = 1e-3

TIME_VARYING = ("rainfall", "ndvi", "food_price_index", "conflict_events",
                "terrain_ruggedness")
TIME_INVARIANT = ("district_size", "cropland_share", "pasture_share", "population")
TRADITIONAL_HEADER = ["country", "month", *TIME_VARYING, *TIME_INVARIANT]

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")


@dataclass(frozen=True)
class TraditionalRow:
    key: CountryMonthKey
    rainfall: float
    ndvi: float
    food_price_index: float
    conflict_events: float
    terrain_ruggedness: float
    district_size: float
    cropland_share: float
    pasture_share: float
    population: float

    def __post_init__(self) -> None:
        for name in ("cropland_share", "pasture_share"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0,1], got {value} at {self.key}")
        values = [getattr(self, name) for name in TIME_VARYING + TIME_INVARIANT]
        if not np.isfinite(values).all():
            raise ValueError(f"non-finite traditional factors at {self.key}")

    def time_varying(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in TIME_VARYING])

    def time_invariant(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in TIME_INVARIANT])


@dataclass(frozen=True)
class KeywordConfig:
    keywords: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.keywords:
            raise ValueError("keyword list must be non-empty")
        if len(set(self.keywords)) != len(self.keywords):
            raise ValueError("keyword list has duplicates")
        if any(k != k.lower() for k in self.keywords):
            raise ValueError("keywords must be lowercase")

    @classmethod
    def load(cls, path: str | Path) -> "KeywordConfig":
        terms = []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.strip()
            if line and not line.startswith("#"):
                terms.append(line.lower())
        return cls(tuple(terms))


def load_traditional(path: str | Path) -> list[TraditionalRow]:
    rows = []
    seen: set[CountryMonthKey] = set()
    for line_no, cells in _iter_csv_rows(path, TRADITIONAL_HEADER):
        try:
            key = CountryMonthKey(cells["country"], Month.parse(cells["month"]))
            row = TraditionalRow(key, *[float(cells[name])
                                        for name in TIME_VARYING + TIME_INVARIANT])
        except ValueError as exc:
            raise ValueError(f"{path} line {line_no}: {exc}") from exc
        if key in seen:
            raise ValueError(f"{path} line {line_no}: duplicate row for {key}")
        seen.add(key)
        rows.append(row)
    return rows


def save_traditional(rows: Iterable[TraditionalRow], path: str | Path,
                     meta: str | None = None) -> None:
    buf = io.StringIO()
    if meta:
        buf.write(meta + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRADITIONAL_HEADER)
    for row in rows:
        writer.writerow([row.key.country, str(row.key.month)]
                        + [repr(float(getattr(row, name)))
                           for name in TIME_VARYING + TIME_INVARIANT])
    atomic_write_text(path, buf.getvalue())


def keyword_features(
    corpus: Sequence[CorpusArticle],
    cfg: KeywordConfig,
) -> dict[CountryMonthKey, np.ndarray]:
    """Whole-token keyword frequencies per country-month.

    Counts are case-insensitive and normalized by the month's total token
    count, so corpus volume does not leak into the feature scale.
    """
    counts: dict[CountryMonthKey, np.ndarray] = {}
    totals: dict[CountryMonthKey, int] = {}
    kw_index = {k: i for i, k in enumerate(cfg.keywords)}
    for article in corpus:
        vec = counts.setdefault(article.key, np.zeros(len(cfg.keywords)))
        for sentence in article.sentences:
            for token in _TOKEN_SPLIT.split(sentence.lower()):
                if not token:
                    continue
                totals[article.key] = totals.get(article.key, 0) + 1
                idx = kw_index.get(token)
                if idx is not None:
                    vec[idx] += 1.0
    return {
        key: vec / totals[key] if totals.get(key) else np.zeros_like(vec)
        for key, vec in counts.items()
    }


@dataclass
class DesignMatrix:
    x: np.ndarray
    y: np.ndarray
    row_keys: list[CountryMonthKey]
    columns: list[str]
    dropped: list[CountryMonthKey]


def build_design(
    labels: Sequence[LabelRow],
    traditional: Sequence[TraditionalRow],
    keyword_feats: Mapping[CountryMonthKey, np.ndarray] | None = None,
    keyword_names: Sequence[str] = (),
    lag_min: int = LAG_MIN,
    lag_max: int = LAG_MAX,
    country_dummies: bool = False,
) -> DesignMatrix:
    """One row per (country, month) with all lags available.

    Columns: crisis-index self-lags, then every time-varying feature at lags
    lag_min..lag_max, then time-invariant features, optional per-country
    intercept dummies (reference = first country), then the intercept.
    Months missing any lagged value are dropped and reported.
    """
    if not 1 <= lag_min <= lag_max:
        raise ValueError(f"need 1 <= lag_min <= lag_max, got {(lag_min, lag_max)}")
    fci = {row.key: row.fci for row in labels}
    trad = {row.key: row for row in traditional}
    kw = dict(keyword_feats or {})
    n_kw = len(keyword_names)
    lags = range(lag_min, lag_max + 1)
    dummy_countries = sorted({k.country for k in fci})[1:] if country_dummies else []

    columns = [f"fci_lag{lag}" for lag in lags]
    for name in TIME_VARYING:
        columns += [f"{name}_lag{lag}" for lag in lags]
    for name in keyword_names:
        columns += [f"kw_{name}_lag{lag}" for lag in lags]
    columns += list(TIME_INVARIANT)
    columns += [f"country_{c}" for c in dummy_countries]
    columns.append("intercept")

    rows, targets, row_keys, dropped = [], [], [], []
    for key in sorted(fci):
        cells: list[float] = []
        ok = True
        lag_keys = [CountryMonthKey(key.country, key.month.shift(-lag)) for lag in lags]
        for lag_key in lag_keys:
            if lag_key not in fci:
                ok = False
                break
            cells.append(fci[lag_key])
        if ok:
            for name in TIME_VARYING:
                for lag_key in lag_keys:
                    row = trad.get(lag_key)
                    if row is None:
                        ok = False
                        break
                    cells.append(float(getattr(row, name)))
                if not ok:
                    break
        if ok and n_kw:
            for j in range(n_kw):
                for lag_key in lag_keys:
                    vec = kw.get(lag_key)
                    if vec is None:
                        ok = False
                        break
                    cells.append(float(vec[j]))
                if not ok:
                    break
        if ok:
            current = trad.get(key)
            if current is None:
                ok = False
            else:
                cells.extend(current.time_invariant().tolist())
        if not ok:
            dropped.append(key)
            continue
        cells.extend(1.0 if key.country == c else 0.0 for c in dummy_countries)
        cells.append(1.0)
        rows.append(cells)
        targets.append(fci[key])
        row_keys.append(key)

    if not rows:
        raise ValueError("no usable rows: insufficient lag history")
    for key in dropped:
        logger.debug("dropped %s: missing lagged values", key)
    return DesignMatrix(
        x=np.array(rows, dtype=np.float64),
        y=np.array(targets, dtype=np.float64),
        row_keys=row_keys,
        columns=columns,
        dropped=dropped,
    )


@dataclass
class AdlModel:
    columns: list[str]
    means: np.ndarray        # per-column standardization stats (intercept exempt)
    stds: np.ndarray
    beta_std: np.ndarray     # coefficients in standardized space
    ridge: float
    lag_min: int = LAG_MIN
    lag_max: int = LAG_MAX

    @property
    def intercept_std(self) -> float:
        return float(self.beta_std[-1])

    def coefficients(self) -> dict[str, float]:
        """Named coefficients mapped back to original feature units."""
        out = {}
        intercept = self.intercept_std
        for j, name in enumerate(self.columns[:-1]):
            coef = self.beta_std[j] / self.stds[j]
            out[name] = float(coef)
            intercept -= coef * self.means[j]
        out["intercept"] = float(intercept)
        return out


def _standardize(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    means = x.mean(axis=0)
    stds = x.std(axis=0)
    means[-1], stds[-1] = 0.0, 1.0  # intercept column passes through
    stds = np.where(stds > 0, stds, 1.0)
    return (x - means) / stds, means, stds


def fit_adl(design: DesignMatrix, ridge: float = DEFAULT_RIDGE) -> AdlModel:
    """Ridge-regularized least squares; the intercept is never penalized."""
    if ridge < 0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")
    x_std, means, stds = _standardize(design.x)
    if ridge == 0 and np.linalg.matrix_rank(x_std) < x_std.shape[1]:
        raise ValueError("design matrix is rank-deficient; refit with ridge > 0")
    gram = x_std.T @ x_std
    penalty = np.full(len(design.columns), ridge)
    penalty[-1] = 0.0
    system = gram + np.diag(penalty)
    rhs = x_std.T @ design.y
    try:
        beta = cho_solve(cho_factor(system), rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError(
            "design matrix is rank-deficient; refit with ridge > 0"
        ) from exc
    return AdlModel(columns=list(design.columns), means=means, stds=stds,
                    beta_std=beta, ridge=ridge)


def predict_adl(model: AdlModel, design: DesignMatrix) -> np.ndarray:
    """Crisis-index predictions in original units for a compatible design."""
    if design.columns != model.columns:
        for got, expected in zip(design.columns, model.columns):
            if got != expected:
                raise ValueError(
                    f"design schema mismatch: column {got!r} where model expects {expected!r}"
                )
        raise ValueError(
            f"design schema mismatch: {len(design.columns)} columns, "
            f"model expects {len(model.columns)}"
        )
    x_std = (design.x - model.means) / model.stds
    return x_std @ model.beta_std


def rmse(predictions: np.ndarray, targets: np.ndarray) -> float:
    predictions = np.asarray(predictions, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    return float(np.sqrt(np.mean((predictions - targets) ** 2)))


def save_adl_model(model: AdlModel, path: str | Path, meta: dict | None = None) -> None:
    obj = {
        "columns": model.columns,
        "coefficients": model.coefficients(),
        "ridge": model.ridge,
        "lag_min": model.lag_min,
        "lag_max": model.lag_max,
    }
    if meta is not None:
        obj["meta"] = meta
    atomic_write_text(path, json.dumps(obj, sort_keys=True, indent=1) + "\n")
