"""Topic modeling over the corpus by collapsed Gibbs sampling.

Preprocessing lowercases, splits on non-alphanumerics, drops short tokens
and stopwords, and applies a small deterministic suffix-stripping stemmer
(a stand-in for full lemmatization that keeps the module dependency-free).
The sampler is a single-chain collapsed Gibbs LDA with Mallet-style
defaults (K=8, alpha=50/K, beta=0.01) and a final-sample estimate of the
topic-word distributions.
"""
from __future__ import annotations

import io
import json
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._stopwords import STOPWORDS
from ._util import atomic_write_text
from .gist import GistReport, Side

logger = logging.getLogger(__name__)

DEFAULT_K = 8
DEFAULT_BETA = 0.01
DEFAULT_ITERATIONS = 1000
TOP_WORDS = 15

_TOKEN_SPLIT = re.compile(r"[^0-9a-z]+")

# Suffix rules tried in order; a rule fires only if the remaining stem keeps
# at least three characters, and at most one rule from each stage applies.
_PLURAL_RULES = (("sses", "ss"), ("ies", "i"), ("ss", "ss"), ("s", ""))
_SUFFIX_RULES = (("ing", ""), ("ed", ""), ("ly", ""))


def stem(token: str) -> str:
    """Deterministic suffix-stripping stemmer."""
    for suffix, repl in _PLURAL_RULES:
        if token.endswith(suffix):
            candidate = token[: len(token) - len(suffix)] + repl
            if len(candidate) >= 3:
                token = candidate
            break
    for suffix, repl in _SUFFIX_RULES:
        if token.endswith(suffix):
            candidate = token[: len(token) - len(suffix)] + repl
            if len(candidate) >= 3:
                token = candidate
            break
    return token


def preprocess(text: str) -> list[str]:
    """Lowercase, split, drop short tokens and stopwords, stem."""
    tokens = []
    for raw in _TOKEN_SPLIT.split(text.lower()):
        if len(raw) < 3 or raw in STOPWORDS:
            continue
        tokens.append(stem(raw))
    return tokens


@dataclass
class Vocabulary:
    tokens: list[str]
    df: list[int]

    def __post_init__(self) -> None:
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("duplicate vocabulary terms")
        if any(d < 1 for d in self.df):
            raise ValueError("document frequencies must be >= 1")
        self.index = {t: i for i, t in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def build(
        cls,
        docs: Sequence[Sequence[str]],
        min_df: int = 1,
        max_df_frac: float = 1.0,
    ) -> "Vocabulary":
        """Sorted vocabulary with document-frequency pruning."""
        df: dict[str, int] = {}
        for doc in docs:
            for term in set(doc):
                df[term] = df.get(term, 0) + 1
        cap = max_df_frac * len(docs)
        kept = sorted(t for t, d in df.items() if d >= min_df and d <= cap)
        return cls(tokens=kept, df=[df[t] for t in kept])


@dataclass
class TopicModel:
    k: int
    alpha: float
    beta: float
    vocab: Vocabulary
    phi: np.ndarray          # (K, |V|) topic-word probabilities
    assignments: list[np.ndarray]  # final-sample token topics per document

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError(f"K must be >= 2, got {self.k}")
        sums = self.phi.sum(axis=1)
        if not np.allclose(sums, 1.0, atol=1e-9):
            raise ValueError("phi rows must sum to 1")

    def top_words(self, topic: int, count: int = TOP_WORDS) -> list[tuple[str, float]]:
        order = np.argsort(-self.phi[topic], kind="stable")[:count]
        return [(self.vocab.tokens[i], float(self.phi[topic, i])) for i in order]


@dataclass
class TopicProfile:
    side: Side
    mass: np.ndarray  # (K,) summed topic probabilities


def _encode(docs: Sequence[Sequence[str]], vocab: Vocabulary) -> list[np.ndarray]:
    index = vocab.index
    return [
        np.array([index[t] for t in doc if t in index], dtype=np.int64)
        for doc in docs
    ]


def fit_lda(
    docs: Sequence[Sequence[str]],
    k: int = DEFAULT_K,
    iterations: int = DEFAULT_ITERATIONS,
    alpha: float | None = None,
    beta: float = DEFAULT_BETA,
    seed: int = 0,
    vocab: Vocabulary | None = None,
) -> TopicModel:
    """Collapsed Gibbs sampling over token-topic assignments.

    The returned phi uses the final sample's counts with beta smoothing:
    phi[k][v] = (n_kv + beta) / (n_k + |V| beta).
    """
    if alpha is None:
        alpha = 50.0 / k
    if vocab is None:
        vocab = Vocabulary.build(docs)
    if len(vocab) < k:
        raise ValueError(f"vocabulary size {len(vocab)} < K={k}")
    encoded = _encode(docs, vocab)
    nonempty = sum(1 for doc in encoded if doc.size)
    if nonempty < k:
        raise ValueError(f"need >= K={k} non-empty documents, got {nonempty}")

    v_size = len(vocab)
    rng = np.random.default_rng(seed)
    docs_l = [doc.tolist() for doc in encoded]
    # plain-list counts: the K-wide inner loop beats numpy's per-call overhead
    n_kv = [[0] * v_size for _ in range(k)]
    n_k = [0] * k
    assignments: list[list[int]] = []
    n_dk_all: list[list[int]] = []

    for doc in docs_l:
        z = rng.integers(0, k, size=len(doc)).tolist()
        n_dk = [0] * k
        for token, topic in zip(doc, z):
            n_kv[topic][token] += 1
            n_k[topic] += 1
            n_dk[topic] += 1
        assignments.append(z)
        n_dk_all.append(n_dk)

    beta_total = beta * v_size
    cum = [0.0] * k
    rand = rng.random
    for _ in range(iterations):
        for doc, z, n_dk in zip(docs_l, assignments, n_dk_all):
            for pos, token in enumerate(doc):
                old = z[pos]
                n_kv[old][token] -= 1
                n_k[old] -= 1
                n_dk[old] -= 1
                total = 0.0
                for topic in range(k):
                    total += (n_kv[topic][token] + beta) / (n_k[topic] + beta_total) \
                        * (n_dk[topic] + alpha)
                    cum[topic] = total
                r = rand() * total
                new = 0
                while cum[new] < r and new < k - 1:
                    new += 1
                z[pos] = new
                n_kv[new][token] += 1
                n_k[new] += 1
                n_dk[new] += 1

    counts = np.array(n_kv, dtype=np.float64)
    phi = (counts + beta) / (counts.sum(axis=1) + beta_total)[:, None]
    return TopicModel(k=k, alpha=alpha, beta=beta, vocab=vocab, phi=phi,
                      assignments=[np.array(z, dtype=np.int64) for z in assignments])


def infer(
    tokens: Sequence[str],
    model: TopicModel,
    iterations: int = 100,
    seed: int = 0,
) -> tuple[np.ndarray, bool]:
    """Doc-topic proportions with phi held fixed.

    Returns (theta, prior_only); unseen tokens are ignored, and a document
    with no known tokens falls back to the uniform prior with the flag set.
    """
    doc = [model.vocab.index[t] for t in tokens if t in model.vocab.index]
    k = model.k
    if not doc:
        return np.full(k, 1.0 / k), True

    rng = np.random.default_rng(seed)
    z = rng.integers(0, k, size=len(doc)).tolist()
    n_dk = [0] * k
    for topic in z:
        n_dk[topic] += 1
    # per-token topic-word columns, as lists for the tight loop
    phi_cols = model.phi[:, doc].T.tolist()
    alpha = model.alpha
    cum = [0.0] * k
    rand = rng.random
    for _ in range(iterations):
        for pos in range(len(doc)):
            col = phi_cols[pos]
            n_dk[z[pos]] -= 1
            total = 0.0
            for topic in range(k):
                total += col[topic] * (n_dk[topic] + alpha)
                cum[topic] = total
            r = rand() * total
            new = 0
            while cum[new] < r and new < k - 1:
                new += 1
            z[pos] = new
            n_dk[new] += 1
    theta = (np.array(n_dk, dtype=np.float64) + alpha) / (len(doc) + k * alpha)
    return theta, False


def profile_gists(
    report: GistReport,
    model: TopicModel,
    iterations: int = 100,
    seed: int = 0,
) -> tuple[TopicProfile, TopicProfile]:
    """Summed inferred topic distributions for the high and low gist sets."""
    profiles = []
    for side, records in ((Side.HIGH, report.high), (Side.LOW, report.low)):
        mass = np.zeros(model.k)
        for i, rec in enumerate(records):
            theta, _ = infer(preprocess(rec.text), model, iterations=iterations,
                             seed=seed + i)
            mass += theta
        profiles.append(TopicProfile(side=side, mass=mass))
    return profiles[0], profiles[1]


def save_topic_model(model: TopicModel, path: str | Path, meta: dict | None = None) -> None:
    obj = {
        "k": model.k,
        "alpha": model.alpha,
        "beta": model.beta,
        "vocab": model.vocab.tokens,
        "df": model.vocab.df,
        "phi": model.phi.tolist(),
    }
    if meta is not None:
        obj["meta"] = meta
    atomic_write_text(path, json.dumps(obj, sort_keys=True) + "\n")


def load_topic_model(path: str | Path) -> TopicModel:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    vocab = Vocabulary(tokens=list(obj["vocab"]), df=list(obj["df"]))
    return TopicModel(
        k=int(obj["k"]),
        alpha=float(obj["alpha"]),
        beta=float(obj["beta"]),
        vocab=vocab,
        phi=np.array(obj["phi"], dtype=np.float64),
        assignments=[],
    )


def save_topic_summary(model: TopicModel, path: str | Path, meta: str | None = None) -> None:
    """Topic summary TSV: topic, rank, word, probability (top words only)."""
    buf = io.StringIO()
    if meta:
        buf.write(meta + "\n")
    buf.write("topic\trank\tword\tprobability\n")
    for topic in range(model.k):
        for rank, (word, prob) in enumerate(model.top_words(topic), start=1):
            buf.write(f"{topic}\t{rank}\t{word}\t{prob!r}\n")
    atomic_write_text(path, buf.getvalue())


def save_profiles(
    high: TopicProfile,
    low: TopicProfile,
    path: str | Path,
    meta: str | None = None,
) -> None:
    buf = io.StringIO()
    if meta:
        buf.write(meta + "\n")
    buf.write("side\ttopic\tmass\n")
    for profile in (high, low):
        for topic, mass in enumerate(profile.mass):
            buf.write(f"{profile.side.value}\t{topic}\t{float(mass)!r}\n")
    atomic_write_text(path, buf.getvalue())
