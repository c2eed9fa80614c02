"""Mini-batch Adam training loop with periodic dev evaluation.

The loop shuffles the training set each epoch with a seeded RNG, applies one
Adam update per mini-batch, evaluates crisis-index RMSE on the dev set every
`eval_every` steps, keeps the best parameters seen, and stops after
`patience` evaluations without strict improvement or at `max_steps`.
Everything is deterministic for a fixed seed.
"""
from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from ._util import atomic_write_text
from .dataset import PanelSample
from .model import (
    ModelParams,
    TargetScaler,
    TaskWeights,
    forward,
    forward_backward,
)

logger = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr: float = 1e-3
    batch_size: int = 32
    eval_every: int = 5
    patience: int = 10
    max_steps: int = 10000
    seed: int = 0
    weights: TaskWeights = field(default_factory=TaskWeights)
    attention: str = "softmax"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.lr <= 0:
            raise ValueError(f"lr must be positive, got {self.lr}")
        for name in ("batch_size", "eval_every", "patience", "max_steps"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")


class StopReason(Enum):
    PATIENCE = "patience"
    MAX_STEPS = "max_steps"


@dataclass
class TrainReport:
    best_params: ModelParams
    best_step: int
    best_dev_rmse: float
    history: list[tuple[int, float]]  # (step, dev_rmse_fci)
    stop_reason: StopReason
    target_scaler: TargetScaler


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, size: int) -> "AdamState":
        return cls(m=np.zeros(size), v=np.zeros(size))


def adam_step(
    params: np.ndarray,
    grads: np.ndarray,
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update on flat parameter vectors."""
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError("params, grads, and state shapes must match")
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * grads
    v = beta2 * state.v + (1.0 - beta2) * grads ** 2
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    updated = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return updated, AdamState(m=m, v=v, t=t)


def _rmse_fci(
    params: ModelParams,
    samples: Sequence[PanelSample],
    attention: str,
) -> float:
    errs = np.empty(len(samples))
    for i, sample in enumerate(samples):
        errs[i] = forward(sample.embeddings, params, attention).preds[0] - sample.targets[0]
    return float(np.sqrt(np.mean(errs ** 2)))


def train(
    train_set: Sequence[PanelSample],
    dev_set: Sequence[PanelSample],
    cfg: TrainConfig,
    init: ModelParams | None = None,
    d_h: int = 128,
    shared: bool = True,
) -> TrainReport:
    """Train from `init` (or fresh Glorot params) until patience or max_steps."""
    if not train_set or not dev_set:
        raise ValueError("train and dev sets must be non-empty")
    dims = {s.embeddings.shape[1] for s in list(train_set) + list(dev_set)}
    if len(dims) != 1:
        raise ValueError(f"inconsistent embedding dims: {sorted(dims)}")
    d = dims.pop()

    if init is None:
        from .model import init_params
        if not shared:
            d_h = d
        params = init_params(d, d_h, seed=cfg.seed, shared=shared)
    else:
        params = init.copy()

    scaler = TargetScaler.fit(np.stack([s.targets for s in train_set]))
    scaled_targets = [scaler.transform(s.targets) for s in train_set]

    flat = params.to_flat()
    template = params
    state = AdamState.zeros(flat.size)
    rng = np.random.default_rng(cfg.seed)

    history: list[tuple[int, float]] = []
    best_rmse = float("inf")
    best_flat = flat.copy()
    best_step = 0
    evals_since_improve = 0
    step = 0
    stop_reason = StopReason.MAX_STEPS

    done = False
    while not done:
        order = rng.permutation(len(train_set))
        for lo in range(0, len(order), cfg.batch_size):
            batch = order[lo:lo + cfg.batch_size]
            step += 1
            params = template.from_flat(flat)
            grad_sum = np.zeros_like(flat)
            loss_sum = 0.0
            try:
                for idx in batch:
                    sample = train_set[idx]
                    _, sample_loss, grads = forward_backward(
                        sample.embeddings, params, scaled_targets[idx],
                        cfg.weights, cfg.attention,
                    )
                    grad_sum += grads.to_flat()
                    loss_sum += sample_loss
            except ValueError as exc:
                if "finite" in str(exc):
                    raise ValueError(f"diverged at step {step}") from exc
                raise
            if not np.isfinite(loss_sum) or not np.isfinite(grad_sum).all():
                raise ValueError(f"diverged at step {step}")
            flat, state = adam_step(
                flat, grad_sum / len(batch), state,
                lr=cfg.lr, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps,
            )

            if step % cfg.eval_every == 0:
                dev_rmse = _rmse_fci(template.from_flat(flat), dev_set, cfg.attention)
                if not np.isfinite(dev_rmse):
                    raise ValueError(f"diverged at step {step}")
                history.append((step, dev_rmse))
                if dev_rmse < best_rmse:
                    best_rmse = dev_rmse
                    best_flat = flat.copy()
                    best_step = step
                    evals_since_improve = 0
                else:
                    evals_since_improve += 1
                if evals_since_improve >= cfg.patience:
                    stop_reason = StopReason.PATIENCE
                    done = True
                    break
            if step >= cfg.max_steps:
                stop_reason = StopReason.MAX_STEPS
                done = True
                break

    return TrainReport(
        best_params=template.from_flat(best_flat),
        best_step=best_step,
        best_dev_rmse=best_rmse,
        history=history,
        stop_reason=stop_reason,
        target_scaler=scaler,
    )


@dataclass
class EvalResult:
    rmse_fci: float
    per_country: dict[str, float]
    rmse_price: float
    rmse_social: float
    price_social_zscored: bool

    def to_json(self) -> dict:
        return {
            "rmse_fci": self.rmse_fci,
            "per_country": dict(sorted(self.per_country.items())),
            "rmse_price": self.rmse_price,
            "rmse_social": self.rmse_social,
            "price_social_zscored": self.price_social_zscored,
        }


def evaluate(
    params: ModelParams,
    samples: Sequence[PanelSample],
    attention: str = "softmax",
    scaler: TargetScaler | None = None,
) -> EvalResult:
    """RMSE on the crisis index (original units, overall and per country) plus
    price/social RMSE in z-scored units when a scaler is supplied."""
    if not samples:
        raise ValueError("cannot evaluate an empty dataset")
    zscored = scaler is not None
    scaler = scaler or TargetScaler()
    sq_err = np.empty((len(samples), 3))
    countries = []
    for i, sample in enumerate(samples):
        preds = forward(sample.embeddings, params, attention).preds
        sq_err[i] = (preds - scaler.transform(sample.targets)) ** 2
        countries.append(sample.country)

    per_country: dict[str, float] = {}
    for country in sorted(set(countries)):
        mask = np.array([c == country for c in countries])
        per_country[country] = float(np.sqrt(sq_err[mask, 0].mean()))
    overall = np.sqrt(sq_err.mean(axis=0))
    return EvalResult(
        rmse_fci=float(overall[0]),
        per_country=per_country,
        rmse_price=float(overall[1]),
        rmse_social=float(overall[2]),
        price_social_zscored=zscored,
    )


def save_train_log(report: TrainReport, path: str | Path, meta: str | None = None) -> None:
    """Training log CSV: step,dev_rmse_fci."""
    buf = io.StringIO()
    if meta:
        buf.write(meta + "\n")
    buf.write("step,dev_rmse_fci\n")
    for step, rmse in report.history:
        buf.write(f"{step},{rmse!r}\n")
    atomic_write_text(path, buf.getvalue())


def save_train_report(
    report: TrainReport,
    path: str | Path,
    test_eval: EvalResult | None = None,
    meta: dict | None = None,
) -> None:
    obj = {
        "stop_reason": report.stop_reason.value,
        "best_step": report.best_step,
        "best_dev_rmse_fci": report.best_dev_rmse,
        "evaluations": len(report.history),
        "target_scaler": report.target_scaler.to_json(),
    }
    if test_eval is not None:
        obj["test"] = test_eval.to_json()
    if meta is not None:
        obj["meta"] = meta
    atomic_write_text(path, json.dumps(obj, sort_keys=True, indent=1) + "\n")
