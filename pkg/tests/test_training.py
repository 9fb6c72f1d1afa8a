"""Soft cross-entropy loss, analytic gradients, and the trainer."""

from dataclasses import replace

import numpy as np
import pytest

from softpu.dataset import SoftDataset
from softpu.training import (
    ARCH_LINEAR,
    ARCH_MLP,
    ScoringModel,
    TrainConfig,
    TrainingDiverged,
    initial_params,
    load_model,
    loss_gradient,
    param_count,
    penalized_loss,
    save_model,
    soft_ce_loss,
    threshold_classify,
    train,
)


def random_model(rng, arch, d=None, hidden=5, scale=0.5):
    d = d or int(rng.integers(1, 5))
    h = 0 if arch == ARCH_LINEAR else hidden
    params = scale * rng.standard_normal(param_count(arch, d, h))
    return ScoringModel(arch, d, h, params)


def finite_difference_gradient(model, X, s, l2, h=1e-5):
    g = np.empty_like(model.params)
    for i in range(model.params.size):
        plus = model.params.copy()
        minus = model.params.copy()
        plus[i] += h
        minus[i] -= h
        g[i] = (
            penalized_loss(replace(model, params=plus), X, s, l2)
            - penalized_loss(replace(model, params=minus), X, s, l2)
        ) / (2 * h)
    return g


def gradient_relative_error(analytic, numeric):
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-12)
    return np.abs(analytic - numeric).max() / scale


class TestSoftCeLoss:
    def test_uninformative_scores_on_binary_targets(self):
        got = soft_ce_loss(np.array([0.5, 0.5]), np.array([1.0, 0.0]))
        assert got == pytest.approx(np.log(2), abs=1e-12)

    def test_minimum_at_score_equal_target(self):
        # d/dg of the single-sample loss vanishes at g = s
        target = np.array([0.25])
        at_target = soft_ce_loss(target, target)
        want = -(0.25 * np.log(0.25) + 0.75 * np.log(0.75))
        assert at_target == pytest.approx(want, abs=1e-12)
        for g in (0.1, 0.4, 0.9):
            assert soft_ce_loss(np.array([g]), target) > at_target

    def test_half_target_prefers_half_score(self):
        s = np.array([0.5])
        assert soft_ce_loss(np.array([0.5]), s) < soft_ce_loss(np.array([0.9]), s)

    def test_exact_zero_or_one_score_errors(self):
        with pytest.raises(ValueError, match="strictly inside"):
            soft_ce_loss(np.array([0.0, 0.5]), np.array([0.5, 0.5]))
        with pytest.raises(ValueError, match="strictly inside"):
            soft_ce_loss(np.array([1.0]), np.array([0.5]))


class TestLossGradient:
    def test_matches_finite_differences_both_architectures(self):
        rng = np.random.default_rng(20)
        for arch in (ARCH_LINEAR, ARCH_MLP):
            worst = 0.0
            for _ in range(25):
                model = random_model(rng, arch)
                n = int(rng.integers(2, 25))
                X = rng.standard_normal((n, model.feature_dim))
                s = rng.random(n)
                l2 = float(rng.choice([0.0, 0.05]))
                rel = gradient_relative_error(
                    loss_gradient(model, X, s, l2),
                    finite_difference_gradient(model, X, s, l2),
                )
                worst = max(worst, rel)
            assert worst <= 1e-4, arch

    def test_zero_model_bias_gradient_is_mean_residual(self):
        # at zero weights every score is 0.5, so the bias gradient is
        # mean(0.5 - s); with mean soft label 0.5 it vanishes
        d = 3
        model = ScoringModel(ARCH_LINEAR, d, 0, np.zeros(d + 1))
        X = np.random.default_rng(21).standard_normal((10, d))
        s = np.concatenate([np.full(5, 0.2), np.full(5, 0.8)])
        grad = loss_gradient(model, X, s)
        assert grad[d] == pytest.approx(0.0, abs=1e-12)

    def test_duplicated_batch_same_gradient(self):
        rng = np.random.default_rng(22)
        model = random_model(rng, ARCH_MLP, d=3)
        X = rng.standard_normal((8, 3))
        s = rng.random(8)
        g1 = loss_gradient(model, X, s)
        g2 = loss_gradient(model, np.vstack([X, X]), np.concatenate([s, s]))
        np.testing.assert_allclose(g1, g2, atol=1e-12)

    def test_empty_batch_errors(self):
        model = ScoringModel(ARCH_LINEAR, 2, 0, np.zeros(3))
        with pytest.raises(ValueError, match="non-empty"):
            loss_gradient(model, np.zeros((0, 2)), np.zeros(0))


def binary_feature_dataset(n, seed, means=(0.2, 0.7)):
    rng = np.random.default_rng(seed)
    x = rng.integers(0, 2, n).astype(np.float64)
    s = np.where(x == 0, rng.random(n) < means[0], rng.random(n) < means[1])
    return SoftDataset(
        features=x.reshape(-1, 1),
        soft_labels=s.astype(np.float64),
        feature_names=("x",),
    )


class TestTrain:
    CFG = TrainConfig(learning_rate=0.5, epochs=40, batch_size=256, seed=0)

    def test_converges_to_conditional_means(self):
        ds = binary_feature_dataset(50_000, seed=23)
        cells = np.array([[0.0], [1.0]])
        for arch in (ARCH_LINEAR, ARCH_MLP):
            model = train(ds, arch, self.CFG)
            got = model.scores(cells)
            for value, score in zip((0.0, 1.0), got):
                cell_mean = ds.soft_labels[ds.features[:, 0] == value].mean()
                assert abs(score - cell_mean) <= 0.02, arch

    def test_constant_target(self):
        rng = np.random.default_rng(24)
        ds = SoftDataset(
            features=rng.standard_normal((5000, 3)),
            soft_labels=np.full(5000, 0.5),
        )
        model = train(ds, ARCH_LINEAR, self.CFG)
        scores = model.scores(ds.features)
        assert np.abs(scores - 0.5).max() <= 0.02

    def test_bit_identical_given_seed(self):
        ds = binary_feature_dataset(2000, seed=25)
        for arch in (ARCH_LINEAR, ARCH_MLP):
            a = train(ds, arch, self.CFG)
            b = train(ds, arch, self.CFG)
            assert np.array_equal(a.params, b.params), arch
            assert a.loss_trace == b.loss_trace

    def test_loss_trace_improves(self):
        ds = binary_feature_dataset(20_000, seed=26)
        for arch in (ARCH_LINEAR, ARCH_MLP):
            model = train(ds, arch, self.CFG)
            assert model.loss_trace[-1] < model.loss_trace[0], arch

    def test_divergence_aborts_with_trace(self):
        # lr * l2 > 2 makes the weight-decay factor explosive
        ds = binary_feature_dataset(500, seed=27)
        bad = TrainConfig(learning_rate=10.0, epochs=20, batch_size=64, seed=0, l2=100.0)
        with pytest.raises(TrainingDiverged) as err:
            train(ds, ARCH_LINEAR, bad)
        assert isinstance(err.value.trace, tuple)

    def test_scores_strictly_inside_unit_interval(self):
        ds = binary_feature_dataset(1000, seed=28)
        model = train(ds, ARCH_MLP, self.CFG)
        scores = model.scores(ds.features)
        assert np.all(scores > 0.0) and np.all(scores < 1.0)

    def test_linear_init_is_zero_mlp_init_is_small_uniform(self):
        rng = np.random.default_rng(29)
        lin = initial_params(ARCH_LINEAR, 4, 0, rng)
        assert np.array_equal(lin, np.zeros(5))
        mlp = initial_params(ARCH_MLP, 4, 8, rng)
        weights = np.concatenate([mlp[: 4 * 8], mlp[4 * 8 + 8 : 4 * 8 + 16]])
        assert np.abs(weights).max() <= 0.1
        assert mlp[4 * 8 : 4 * 8 + 8].max() == 0.0  # hidden biases


class TestThresholdClassify:
    def test_basic(self):
        np.testing.assert_array_equal(
            threshold_classify(np.array([0.1, 0.9]), 0.5), [0, 1]
        )

    def test_above_max_gives_all_zero(self):
        assert threshold_classify(np.array([0.3, 0.7]), 0.9).sum() == 0

    def test_strict_at_boundary(self):
        assert threshold_classify(np.array([0.5]), 0.5)[0] == 0

    def test_monotone_in_threshold(self):
        rng = np.random.default_rng(30)
        scores = rng.random(100)
        prev = threshold_classify(scores, 0.9)
        for t in (0.7, 0.5, 0.2, -1.0):
            cur = threshold_classify(scores, t)
            assert np.all(cur >= prev)
            prev = cur


class TestModelIo:
    def test_json_round_trip(self, tmp_path):
        ds = binary_feature_dataset(1000, seed=31)
        model = train(
            ds, ARCH_MLP, TrainConfig(learning_rate=0.3, epochs=3, batch_size=64, seed=5)
        )
        path = tmp_path / "model.json"
        save_model(model, path)
        back = load_model(path)
        assert back.arch == model.arch
        assert back.seed == 5
        assert back.loss_trace == model.loss_trace
        np.testing.assert_array_equal(back.params, model.params)
        x = ds.features[:10]
        np.testing.assert_array_equal(back.scores(x), model.scores(x))

    def test_param_count_validation(self):
        with pytest.raises(ValueError, match="parameters"):
            ScoringModel(ARCH_LINEAR, 3, 0, np.zeros(7))
        with pytest.raises(ValueError, match="architecture"):
            ScoringModel("boosted-trees", 3, 0, np.zeros(4))
