"""Multi-task attention regression network.

Per pseudo-article: an optional shared dense layer z_i = tanh(W h_i + b),
a dot-product attention score r_i = z_i . a + b, attention weights
(softmax by default, raw linear scores behind a switch), an attention-pooled
collection representation h_A = sum_i w_i z_i, and three linear task heads.
The loss is the task-weighted sum of squared errors; gradients are exact
reverse accumulation, validated against central finite differences.

All arithmetic is 64-bit.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._util import atomic_write_text
from .embeddings import CollectionEmbedding

TASKS = ("fci", "price", "social")
ATTENTION_MODES = ("softmax", "raw")

CHECKPOINT_VERSION = 1


@dataclass
class TaskWeights:
    """Nonnegative per-task loss weights; (1,1,1) is the equal-weight default."""

    fci: float = 1.0
    price: float = 1.0
    social: float = 1.0

    def __post_init__(self) -> None:
        arr = self.as_array()
        if (arr < 0).any():
            raise ValueError(f"task weights must be nonnegative: {arr.tolist()}")
        if not arr.any():
            raise ValueError("task weights must not all be zero")

    def as_array(self) -> np.ndarray:
        return np.array([self.fci, self.price, self.social], dtype=np.float64)

    @classmethod
    def parse(cls, text: str) -> "TaskWeights":
        parts = [float(p) for p in text.split(",")]
        if len(parts) != 3:
            raise ValueError(f"expected 3 comma-separated weights, got {text!r}")
        return cls(*parts)


@dataclass
class ModelParams:
    """All learnable parameters; `shared_w is None` disables the shared layer."""

    shared_w: np.ndarray | None  # (d, d_h)
    shared_b: np.ndarray | None  # (d_h,)
    attn_a: np.ndarray           # (d_h,)
    attn_b: float
    head_w: np.ndarray           # (3, d_h), rows in TASKS order
    head_b: np.ndarray           # (3,)

    @property
    def shared(self) -> bool:
        return self.shared_w is not None

    @property
    def d(self) -> int:
        return self.shared_w.shape[0] if self.shared else self.attn_a.shape[0]

    @property
    def d_h(self) -> int:
        return self.attn_a.shape[0]

    def copy(self) -> "ModelParams":
        return ModelParams(
            shared_w=None if self.shared_w is None else self.shared_w.copy(),
            shared_b=None if self.shared_b is None else self.shared_b.copy(),
            attn_a=self.attn_a.copy(),
            attn_b=float(self.attn_b),
            head_w=self.head_w.copy(),
            head_b=self.head_b.copy(),
        )

    def zeros_like(self) -> "ModelParams":
        return ModelParams(
            shared_w=None if self.shared_w is None else np.zeros_like(self.shared_w),
            shared_b=None if self.shared_b is None else np.zeros_like(self.shared_b),
            attn_a=np.zeros_like(self.attn_a),
            attn_b=0.0,
            head_w=np.zeros_like(self.head_w),
            head_b=np.zeros_like(self.head_b),
        )

    def to_flat(self) -> np.ndarray:
        parts = []
        if self.shared:
            parts += [self.shared_w.ravel(), self.shared_b.ravel()]
        parts += [self.attn_a.ravel(), np.array([self.attn_b]),
                  self.head_w.ravel(), self.head_b.ravel()]
        return np.concatenate(parts)

    def from_flat(self, flat: np.ndarray) -> "ModelParams":
        """New params with this one's shapes and `flat`'s values."""
        flat = np.asarray(flat, dtype=np.float64)
        pos = 0

        def take(shape: tuple[int, ...]) -> np.ndarray:
            nonlocal pos
            size = int(np.prod(shape))
            chunk = flat[pos:pos + size].reshape(shape).copy()
            pos += size
            return chunk

        shared_w = take(self.shared_w.shape) if self.shared else None
        shared_b = take(self.shared_b.shape) if self.shared else None
        attn_a = take(self.attn_a.shape)
        attn_b = float(take((1,))[0])
        head_w = take(self.head_w.shape)
        head_b = take(self.head_b.shape)
        if pos != flat.size:
            raise ValueError(f"flat vector size {flat.size} != parameter count {pos}")
        return ModelParams(shared_w, shared_b, attn_a, attn_b, head_w, head_b)


@dataclass
class ForwardTrace:
    """Everything the forward pass computes, kept for analysis and backprop."""

    z: np.ndarray           # (m, d_h) shared representations
    raw_scores: np.ndarray  # (m,)
    attn_w: np.ndarray      # (m,)
    h_a: np.ndarray         # (d_h,)
    preds: np.ndarray       # (3,), TASKS order

    def pred(self, task: str) -> float:
        return float(self.preds[TASKS.index(task)])


def init_params(d: int, d_h: int, seed: int, shared: bool = True) -> ModelParams:
    """Glorot-uniform weights, zero biases, deterministic in seed."""
    if d < 1 or d_h < 1:
        raise ValueError(f"d and d_h must be >= 1, got {(d, d_h)}")
    if not shared and d_h != d:
        raise ValueError("without the shared layer, d_h must equal d")
    rng = np.random.default_rng(seed)

    def glorot(fan_in: int, fan_out: int, shape: tuple[int, ...]) -> np.ndarray:
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=shape)

    return ModelParams(
        shared_w=glorot(d, d_h, (d, d_h)) if shared else None,
        shared_b=np.zeros(d_h) if shared else None,
        attn_a=glorot(d_h, 1, (d_h,)),
        attn_b=0.0,
        head_w=glorot(d_h, 1, (3, d_h)),
        head_b=np.zeros(3),
    )


def _as_matrix(embedding: CollectionEmbedding | np.ndarray) -> np.ndarray:
    matrix = embedding.matrix if isinstance(embedding, CollectionEmbedding) else embedding
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] < 1:
        raise ValueError(f"expected (m, d) matrix, got shape {matrix.shape}")
    if not np.isfinite(matrix).all():
        raise ValueError("non-finite embedding input")
    return matrix


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max()
    exps = np.exp(shifted)
    return exps / exps.sum()


def forward(
    embedding: CollectionEmbedding | np.ndarray,
    params: ModelParams,
    attention: str = "softmax",
) -> ForwardTrace:
    """Full forward pass over one collection's (m, d) article matrix."""
    if attention not in ATTENTION_MODES:
        raise ValueError(f"attention must be one of {ATTENTION_MODES}, got {attention!r}")
    h = _as_matrix(embedding)
    if h.shape[1] != params.d:
        raise ValueError(f"embedding dim {h.shape[1]} != model dim {params.d}")

    z = np.tanh(h @ params.shared_w + params.shared_b) if params.shared else h
    raw_scores = z @ params.attn_a + params.attn_b
    attn_w = _softmax(raw_scores) if attention == "softmax" else raw_scores
    h_a = attn_w @ z
    preds = params.head_w @ h_a + params.head_b
    return ForwardTrace(z=z, raw_scores=raw_scores, attn_w=attn_w, h_a=h_a, preds=preds)


def loss(preds: np.ndarray, labels: np.ndarray, weights: TaskWeights) -> float:
    """Task-weighted sum of squared errors for one sample."""
    preds = np.asarray(preds, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.float64)
    if preds.shape != (3,) or labels.shape != (3,):
        raise ValueError("preds and labels must have shape (3,)")
    if not (np.isfinite(preds).all() and np.isfinite(labels).all()):
        raise ValueError("non-finite loss inputs")
    return float(np.sum(weights.as_array() * (preds - labels) ** 2))


def batch_loss(
    per_sample_preds: Sequence[np.ndarray],
    per_sample_labels: Sequence[np.ndarray],
    weights: TaskWeights,
) -> float:
    """Per-task MSE averaged over samples, then summed over tasks."""
    preds = np.asarray(per_sample_preds, dtype=np.float64)
    labels = np.asarray(per_sample_labels, dtype=np.float64)
    mse = ((preds - labels) ** 2).mean(axis=0)
    return float(np.sum(weights.as_array() * mse))


def forward_backward(
    embedding: CollectionEmbedding | np.ndarray,
    params: ModelParams,
    labels: np.ndarray,
    weights: TaskWeights,
    attention: str = "softmax",
) -> tuple[ForwardTrace, float, ModelParams]:
    """(trace, loss, gradients) for one sample; gradients mirror ModelParams."""
    h = _as_matrix(embedding)
    trace = forward(h, params, attention)
    labels = np.asarray(labels, dtype=np.float64)
    sample_loss = loss(trace.preds, labels, weights)

    # dL/dpred_j = 2 lambda_j (pred_j - y_j)
    err = 2.0 * weights.as_array() * (trace.preds - labels)

    grads = params.zeros_like()
    grads.head_w = np.outer(err, trace.h_a)
    grads.head_b = err.copy()
    g_ha = err @ params.head_w  # (d_h,)

    z, attn_w = trace.z, trace.attn_w
    q = z @ g_ha  # dL/d(attn_w_i)
    if attention == "softmax":
        # softmax Jacobian: dL/dr_k = w_k (q_k - sum_i w_i q_i)
        t = attn_w * (q - attn_w @ q)
    else:
        t = q
    grads.attn_a = z.T @ t
    grads.attn_b = float(t.sum())

    # h_A route contributes attn_w_i * g_ha; the score route adds t_i * a
    g_z = np.outer(attn_w, g_ha) + np.outer(t, params.attn_a)
    if params.shared:
        g_pre = g_z * (1.0 - z ** 2)  # tanh'
        grads.shared_w = h.T @ g_pre
        grads.shared_b = g_pre.sum(axis=0)

    return trace, sample_loss, grads


def backward(
    embedding: CollectionEmbedding | np.ndarray,
    params: ModelParams,
    labels: np.ndarray,
    weights: TaskWeights,
    attention: str = "softmax",
) -> ModelParams:
    """Gradient of the single-sample loss with respect to every parameter."""
    return forward_backward(embedding, params, labels, weights, attention)[2]


@dataclass
class TargetScaler:
    """z-scoring for price/social targets so the three losses are commensurate.

    The crisis-index target stays in its native [1,5] scale.
    """

    price_mean: float = 0.0
    price_std: float = 1.0
    social_mean: float = 0.0
    social_std: float = 1.0

    @classmethod
    def fit(cls, targets: np.ndarray) -> "TargetScaler":
        targets = np.asarray(targets, dtype=np.float64)
        if targets.ndim != 2 or targets.shape[1] != 3:
            raise ValueError("targets must be (n, 3)")

        def stats(col: np.ndarray) -> tuple[float, float]:
            std = float(col.std())
            return float(col.mean()), std if std > 0 else 1.0

        pm, ps = stats(targets[:, 1])
        sm, ss = stats(targets[:, 2])
        return cls(price_mean=pm, price_std=ps, social_mean=sm, social_std=ss)

    def transform(self, targets: np.ndarray) -> np.ndarray:
        out = np.asarray(targets, dtype=np.float64).copy()
        out[..., 1] = (out[..., 1] - self.price_mean) / self.price_std
        out[..., 2] = (out[..., 2] - self.social_mean) / self.social_std
        return out

    def to_json(self) -> dict:
        return {
            "price": [self.price_mean, self.price_std],
            "social": [self.social_mean, self.social_std],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "TargetScaler":
        return cls(price_mean=obj["price"][0], price_std=obj["price"][1],
                   social_mean=obj["social"][0], social_std=obj["social"][1])


def save_checkpoint(
    params: ModelParams,
    path: str | Path,
    scaler: TargetScaler | None = None,
    attention: str = "softmax",
    meta: dict | None = None,
) -> None:
    obj = {
        "version": CHECKPOINT_VERSION,
        "d": params.d,
        "d_h": params.d_h,
        "shared": params.shared,
        "attention": attention,
        "params": {
            "shared_w": params.shared_w.tolist() if params.shared else None,
            "shared_b": params.shared_b.tolist() if params.shared else None,
            "attn_a": params.attn_a.tolist(),
            "attn_b": params.attn_b,
            "head_w": params.head_w.tolist(),
            "head_b": params.head_b.tolist(),
        },
        "target_scaler": (scaler or TargetScaler()).to_json(),
    }
    if meta is not None:
        obj["meta"] = meta
    atomic_write_text(path, json.dumps(obj, sort_keys=True, indent=1) + "\n")


def load_checkpoint(path: str | Path) -> tuple[ModelParams, TargetScaler, str]:
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if obj.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {obj.get('version')}")
    raw = obj["params"]
    shared = bool(obj["shared"])
    params = ModelParams(
        shared_w=np.array(raw["shared_w"], dtype=np.float64) if shared else None,
        shared_b=np.array(raw["shared_b"], dtype=np.float64) if shared else None,
        attn_a=np.array(raw["attn_a"], dtype=np.float64),
        attn_b=float(raw["attn_b"]),
        head_w=np.array(raw["head_w"], dtype=np.float64),
        head_b=np.array(raw["head_b"], dtype=np.float64),
    )
    scaler = TargetScaler.from_json(obj["target_scaler"])
    return params, scaler, str(obj.get("attention", "softmax"))
