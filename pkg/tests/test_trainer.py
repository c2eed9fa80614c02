"""Training loop: Adam, early stopping cadence, determinism, evaluation."""
from __future__ import annotations

import numpy as np
import pytest

from gistcast.dataset import PanelSample
from gistcast.model import TaskWeights, forward, init_params
from gistcast.panel import CountryMonthKey, Month
from gistcast.trainer import (
    AdamState,
    StopReason,
    TrainConfig,
    adam_step,
    evaluate,
    train,
)


def sample_of(country: str, month_offset: int, fold: int, emb: np.ndarray,
              targets) -> PanelSample:
    return PanelSample(
        key=CountryMonthKey(country, Month(2018, 1).shift(month_offset)),
        fold=fold,
        embeddings=np.asarray(emb, dtype=np.float64),
        targets=np.asarray(targets, dtype=np.float64),
    )


def _zero_bias_params(fci_bias: float = 0.0):
    from gistcast.model import ModelParams
    return ModelParams(
        shared_w=None, shared_b=None,
        attn_a=np.zeros(3), attn_b=0.0,
        head_w=np.zeros((3, 3)),
        head_b=np.array([fci_bias, 0.0, 0.0]),
    )


def linear_dataset(n: int, d: int = 4, m: int = 3, noise: float = 0.05,
                   seed: int = 0) -> tuple[list[PanelSample], np.ndarray]:
    """Targets are a fixed linear map of the mean embedding plus noise."""
    rng = np.random.default_rng(seed)
    w_true = rng.standard_normal(d)
    samples = []
    for i in range(n):
        emb = rng.standard_normal((m, d))
        base = float(emb.mean(axis=0) @ w_true)
        targets = [3.0 + 0.5 * base + noise * rng.standard_normal(),
                   base + noise * rng.standard_normal(),
                   -base + noise * rng.standard_normal()]
        samples.append(sample_of(f"C{i % 3}", i % 12, 0, emb, targets))
    return samples, w_true


class TestAdamStep:
    def test_zero_gradient_keeps_params(self):
        params = np.array([1.0, -2.0])
        state = AdamState(m=np.array([0.5, 0.5]), v=np.array([0.25, 0.25]), t=3)
        updated, new_state = adam_step(params, np.zeros(2), state, lr=0.1)
        np.testing.assert_allclose(updated, params, atol=2e-2)
        np.testing.assert_allclose(new_state.m, 0.9 * state.m)
        np.testing.assert_allclose(new_state.v, 0.999 * state.v)

    def test_first_step_hand_trace(self):
        # scalar oracle: m1 = 0.1 g, v1 = 0.001 g^2, bias correction makes
        # m_hat = g and v_hat = g^2, so the step is -lr * g / (|g| + eps)
        g, lr = 2.0, 0.1
        updated, state = adam_step(np.array([1.0]), np.array([g]),
                                   AdamState.zeros(1), lr=lr)
        expected = 1.0 - lr * g / (abs(g) + 1e-8)
        assert updated[0] == pytest.approx(expected, rel=1e-12)
        assert state.t == 1
        np.testing.assert_allclose(state.m, [0.1 * g])
        np.testing.assert_allclose(state.v, [0.001 * g * g])

    def test_deterministic(self):
        params, grads = np.array([0.3, 0.7]), np.array([0.1, -0.2])
        state = AdamState(m=np.array([0.01, 0.02]), v=np.array([0.001, 0.002]), t=5)
        a = adam_step(params, grads, state, lr=0.05)
        b = adam_step(params, grads, state, lr=0.05)
        np.testing.assert_array_equal(a[0], b[0])
        assert a[1].t == b[1].t


class TestTrainLoop:
    def test_runs_to_max_steps_when_improving(self):
        samples, _ = linear_dataset(64, seed=1)
        cfg = TrainConfig(max_steps=40, eval_every=5, patience=50, seed=0)
        report = train(samples, samples, cfg, d_h=8)
        assert report.stop_reason is StopReason.MAX_STEPS
        assert report.history[-1][0] <= 40

    def test_patience_cadence_on_plateau(self):
        # zero embeddings with targets equal to the zero-bias predictions give
        # zero gradients, so parameters freeze and dev RMSE is exactly flat:
        # training must stop eval_every * (patience + 1) steps in
        train_samples = [sample_of("C0", i % 12, 0, np.zeros((2, 3)), [1.0, 0.0, 0.0])
                         for i in range(40)]
        dev_samples = [sample_of("C0", 0, 0, np.zeros((2, 3)), [2.0, 0.0, 0.0])]
        cfg = TrainConfig(eval_every=5, patience=10, max_steps=10_000, seed=0)
        report = train(train_samples, dev_samples, cfg, d_h=3, shared=False,
                       init=_zero_bias_params(fci_bias=1.0))
        assert report.stop_reason is StopReason.PATIENCE
        assert report.history[-1][0] == cfg.eval_every * (cfg.patience + 1) == 55
        assert len({r for _, r in report.history}) == 1

    def test_learns_linear_task(self):
        # oracle: ordinary least squares of targets on mean embeddings
        samples, _ = linear_dataset(160, noise=0.05, seed=2)
        x = np.stack([s.embeddings.mean(axis=0) for s in samples])
        x = np.column_stack([x, np.ones(len(samples))])
        y = np.stack([s.targets[0] for s in samples])
        beta, *_ = np.linalg.lstsq(x, y, rcond=None)
        lstsq_rmse = float(np.sqrt(np.mean((x @ beta - y) ** 2)))
        assert lstsq_rmse <= 0.1  # achievable by construction

        cfg = TrainConfig(lr=3e-3, batch_size=16, eval_every=10, patience=30,
                          max_steps=4000, seed=3)
        report = train(samples, samples, cfg, d_h=16)
        result = evaluate(report.best_params, samples)
        assert result.rmse_fci <= 0.1

    def test_bit_reproducible(self):
        samples, _ = linear_dataset(48, seed=4)
        cfg = TrainConfig(max_steps=60, eval_every=5, patience=20, seed=9)
        a = train(samples, samples, cfg, d_h=6)
        b = train(samples, samples, cfg, d_h=6)
        assert a.history == b.history
        assert a.stop_reason == b.stop_reason
        np.testing.assert_array_equal(a.best_params.to_flat(), b.best_params.to_flat())

    def test_patience_implies_no_recent_improvement(self):
        samples, _ = linear_dataset(48, seed=5)
        cfg = TrainConfig(max_steps=10_000, eval_every=5, patience=6, seed=9)
        report = train(samples, samples, cfg, d_h=6)
        if report.stop_reason is StopReason.PATIENCE:
            best = min(r for _, r in report.history)
            tail = [r for _, r in report.history[-cfg.patience:]]
            assert all(r >= best for r in tail)

    def test_best_matches_history_min(self):
        samples, _ = linear_dataset(48, seed=6)
        cfg = TrainConfig(max_steps=100, eval_every=5, patience=50, seed=2)
        report = train(samples, samples, cfg, d_h=6)
        best_hist = min(r for _, r in report.history)
        assert report.best_dev_rmse == pytest.approx(best_hist, abs=1e-12)
        result = evaluate(report.best_params, samples)
        assert result.rmse_fci == pytest.approx(report.best_dev_rmse, abs=1e-9)

    def test_single_task_ignores_other_labels(self):
        samples, _ = linear_dataset(48, seed=7)
        mangled = [
            PanelSample(s.key, s.fold, s.embeddings,
                        np.array([s.targets[0], 999.0, -999.0]))
            for s in samples
        ]
        cfg = TrainConfig(max_steps=60, eval_every=5, patience=50, seed=1,
                          weights=TaskWeights(1.0, 0.0, 0.0))
        a = train(samples, samples, cfg, d_h=6)
        b = train(mangled, mangled, cfg, d_h=6)
        assert a.history == b.history

    def test_empty_sets_rejected(self):
        samples, _ = linear_dataset(4, seed=8)
        with pytest.raises(ValueError, match="non-empty"):
            train([], samples, TrainConfig())
        with pytest.raises(ValueError, match="non-empty"):
            train(samples, [], TrainConfig())

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_divergence_detected(self):
        samples, _ = linear_dataset(16, seed=9)
        huge = [PanelSample(s.key, s.fold, s.embeddings * 1e150, s.targets)
                for s in samples]
        cfg = TrainConfig(lr=1e100, max_steps=50, seed=0)
        with pytest.raises(ValueError, match="diverged at step"):
            train(huge, huge, cfg, d_h=4, shared=False)


class TestEvaluate:
    def test_perfect_predictions(self):
        params = init_params(3, 3, seed=0, shared=False)
        samples = []
        for i in range(5):
            emb = np.random.default_rng(i).standard_normal((2, 3))
            preds = forward(emb, params).preds
            samples.append(sample_of("C0", i, 0, emb, preds))
        result = evaluate(params, samples)
        assert result.rmse_fci == 0.0

    def test_symmetric_unit_errors(self):
        params = init_params(2, 2, seed=0, shared=False)
        emb = np.zeros((1, 2))
        base = forward(emb, params).preds
        samples = [
            sample_of("C0", 0, 0, emb, base + np.array([1.0, 0.0, 0.0])),
            sample_of("C0", 1, 0, emb, base + np.array([-1.0, 0.0, 0.0])),
        ]
        assert evaluate(params, samples).rmse_fci == pytest.approx(1.0)

    def test_hand_rmse(self):
        params = init_params(2, 2, seed=0, shared=False)
        emb = np.zeros((1, 2))
        base = forward(emb, params).preds
        samples = [
            sample_of("C0", 0, 0, emb, base + np.array([3.0, 0.0, 0.0])),
            sample_of("C1", 1, 0, emb, base + np.array([4.0, 0.0, 0.0])),
        ]
        result = evaluate(params, samples)
        assert result.rmse_fci == pytest.approx(np.sqrt(12.5))
        assert result.per_country["C0"] == pytest.approx(3.0)
        assert result.per_country["C1"] == pytest.approx(4.0)

    def test_empty_rejected(self):
        params = init_params(2, 2, seed=0, shared=False)
        with pytest.raises(ValueError, match="empty"):
            evaluate(params, [])
