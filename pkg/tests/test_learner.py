"""Class weights, boosting against a reference oracle, persistence, importance."""
from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bugloc.errors import BugLocError
from bugloc.learner import (
    BoostedModel,
    TrainConfig,
    WeightedDataset,
    class_weights,
    dump_text,
    dumps_model,
    feature_importance,
    grid_search,
    load_model,
    loads_model,
    predict,
    save_model,
    sigmoid,
    train,
)
from bugloc.vsm import FEATURE_NAMES

from oracles import auc, ref_boost

SMALL = TrainConfig(learning_rate=0.1, n_estimators_cap=15, num_leaves=5, feature_fraction=1.0,
                    min_data_in_leaf=5)


def noisy_data(seed, n=None, d=None):
    rng = np.random.default_rng(seed)
    n = n or int(rng.integers(40, 201))
    d = d or int(rng.integers(1, 6))
    X = rng.random((n, d))
    # ties in feature values exercise the split tie rules
    X[:, -1] = np.round(X[:, -1], 1)
    y = (X[:, 0] + 0.3 * rng.standard_normal(n) > 0.5).astype(float)
    y[:2] = [0.0, 1.0]
    return X, y, rng.uniform(0.5, 3.0, n)


def separable(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    y = (X[:, 0] + X[:, 1] > 1.0).astype(float)
    return X, y


class TestClassWeights:
    def test_single_positive(self):
        assert class_weights([1, 0, 0, 0]).tolist() == [4.0, 1.0, 1.0, 1.0]

    def test_no_negatives(self):
        assert class_weights([1, 1]).tolist() == [1.0, 1.0]

    def test_per_project(self):
        w = class_weights([1, 0, 1, 0, 0, 0], ["A", "A", "B", "B", "B", "B"])
        assert w.tolist() == [2.0, 1.0, 4.0, 1.0, 1.0, 1.0]

    def test_group_without_positives(self):
        with pytest.raises(BugLocError) as err:
            class_weights([1, 0, 0], ["A", "B", "B"])
        assert err.value.code == "no-positive-samples"


class TestOracle:
    @pytest.mark.parametrize("seed", range(8))
    def test_matches_reference_boosting(self, seed):
        X, y, w = noisy_data(seed)
        model = train(WeightedDataset(X, y, w), None, SMALL)
        ref = ref_boost(X.tolist(), y.tolist(), w.tolist(), rounds=15, lr=0.1, num_leaves=5, min_data=5)
        assert np.max(np.abs(predict(model, X) - np.array(ref.predict(X.tolist())))) <= 1e-6

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_reference_early_stopping(self, seed):
        X, y, w = noisy_data(100 + seed, n=160)
        Xv, yv, _ = noisy_data(200 + seed, n=60, d=X.shape[1])
        cfg = replace(SMALL, n_estimators_cap=200, num_leaves=8, learning_rate=0.3, early_stopping_rounds=5)
        model = train(WeightedDataset(X, y, w), WeightedDataset(Xv, yv), cfg)
        ref = ref_boost(X.tolist(), y.tolist(), w.tolist(), rounds=200, lr=0.3, num_leaves=8, min_data=5,
                        valid=(Xv.tolist(), yv.tolist()), patience=5)
        assert model.best_iteration == ref.best_iteration
        assert len(model.trees) == len(ref.trees)
        assert np.max(np.abs(predict(model, Xv) - np.array(ref.predict(Xv.tolist())))) <= 1e-6


class TestTraining:
    def test_uninformative_features_give_base_rate(self):
        X = np.zeros((40, 3))
        y = np.array([0.0, 1.0] * 20)
        model = train(WeightedDataset(X, y), None, TrainConfig.quick(feature_fraction=1.0))
        assert model.degenerate
        assert np.allclose(predict(model, X), 0.5, atol=0.05)

    def test_separable_reaches_high_auc(self):
        X, y = separable(1, 500)
        Xv, yv = separable(2, 200)
        cfg = TrainConfig.quick(feature_fraction=1.0, learning_rate=0.1)
        model = train(WeightedDataset(X, y), WeightedDataset(Xv, yv), cfg)
        assert len(model.trees) <= 100
        assert auc(predict(model, Xv).tolist(), yv.tolist()) >= 0.99

    def test_weight_doubling_changes_nothing(self):
        X, y, w = noisy_data(5)
        a = train(WeightedDataset(X, y, w), None, SMALL)
        b = train(WeightedDataset(X, y, 2 * w), None, SMALL)
        for ta, tb in zip(a.trees, b.trees):
            assert np.array_equal(ta.feature, tb.feature) and np.array_equal(ta.threshold, tb.threshold)
        assert np.max(np.abs(predict(a, X) - predict(b, X))) <= 1e-9

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.integers(1, 6))
    def test_early_stopping_bound(self, seed, patience):
        X, y, w = noisy_data(seed, n=80)
        Xv, yv, _ = noisy_data(seed + 1, n=40, d=X.shape[1])
        cfg = replace(SMALL, n_estimators_cap=300, learning_rate=0.5, early_stopping_rounds=patience)
        model = train(WeightedDataset(X, y, w), WeightedDataset(Xv, yv), cfg)
        assert model.best_iteration <= len(model.trees) <= model.best_iteration + patience
        assert model.eval_history[model.best_iteration] == min(model.eval_history)

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000))
    def test_constant_columns_stay_finite(self, seed):
        rng = np.random.default_rng(seed)
        X = np.hstack([np.ones((50, 2)), np.zeros((50, 1)), rng.random((50, 1))])
        y = (rng.random(50) < 0.3).astype(float)
        y[0], y[1] = 0.0, 1.0
        model = train(WeightedDataset(X, y, class_weights(y)), None, replace(SMALL, lambda_l2=0.0))
        assert all(np.all(np.isfinite(t.value)) for t in model.trees)
        assert np.all(np.isfinite(predict(model, X)))

    def test_needs_both_labels(self):
        with pytest.raises(BugLocError):
            train(WeightedDataset(np.zeros((5, 2)), np.zeros(5)), None, SMALL)

    def test_feature_sampling_width(self):
        X = np.random.default_rng(0).random((60, 70))
        y = (X[:, 3] > 0.5).astype(float)
        model = train(WeightedDataset(X, y), None, TrainConfig.quick(n_estimators_cap=30, num_leaves=4))
        used = {int(f) for t in model.trees for f in t.feature if f >= 0}
        assert used and max(used) < 70
        assert model.feature_names == FEATURE_NAMES

    def test_deterministic_bytes(self):
        X = np.random.default_rng(3).random((80, 70))
        y = (X[:, 10] > 0.6).astype(float)
        cfg = TrainConfig.quick(n_estimators_cap=20, seed=7)
        assert dumps_model(train(WeightedDataset(X, y), None, cfg)) == dumps_model(train(WeightedDataset(X, y), None, cfg))

    def test_config_validation(self):
        for bad in ({"learning_rate": 0}, {"num_leaves": 1}, {"feature_fraction": 1.5}):
            with pytest.raises(ValueError):
                TrainConfig(**bad)


class TestPrediction:
    def test_zero_trees_is_base_score(self):
        model = BoostedModel(trees=[], base_score=0.4, best_iteration=0, learning_rate=0.03)
        assert np.allclose(predict(model, np.zeros((3, 70))), sigmoid(0.4))

    def test_monotone_in_the_informative_feature(self):
        rng = np.random.default_rng(4)
        x = rng.random(200)
        y = (x > 0.5).astype(float)
        model = train(WeightedDataset(x[:, None], y), None, replace(SMALL, n_estimators_cap=50))
        probe = np.linspace(-0.5, 1.5, 400)[:, None]
        assert np.all(np.diff(predict(model, probe)) >= 0)

    def test_grid_mismatch(self):
        model = BoostedModel(trees=[], base_score=0.0, best_iteration=0, learning_rate=0.03)
        with pytest.raises(BugLocError) as err:
            predict(model, np.zeros((2, 5)))
        assert err.value.code == "feature-grid-mismatch"
        with pytest.raises(BugLocError):
            predict(model, np.zeros((2, 70)), feature_names=tuple(reversed(FEATURE_NAMES)))

    def test_round_trip(self, tmp_path):
        X, y, w = noisy_data(9, d=70)
        model = train(WeightedDataset(X, y, w), None, TrainConfig.quick(n_estimators_cap=20))
        model.meta = {"region": "UNION", "train_bugs": ["P-1"]}
        back = loads_model(dumps_model(model))
        assert np.array_equal(predict(back, X), predict(model, X))
        assert back.meta == model.meta and back.config == model.config
        save_model(model, tmp_path / "m.blgb")
        assert np.array_equal(predict(load_model(tmp_path / "m.blgb"), X), predict(model, X))
        assert "tree 0" in dump_text(model).lower()

    def test_bad_magic(self):
        with pytest.raises(BugLocError):
            loads_model(b"NOPE" + b"\0" * 20)


class TestImportance:
    def test_single_informative_feature(self):
        rng = np.random.default_rng(0)
        X = np.hstack([rng.random((100, 1)), np.zeros((100, 1))])
        y = (X[:, 0] > 0.5).astype(float)
        model = train(WeightedDataset(X, y), None, replace(SMALL, n_estimators_cap=10))
        rows = feature_importance(model)
        assert [r[0] for r in rows] == ["f0"]
        assert rows[0][2] == pytest.approx(1.0) and rows[0][3] == pytest.approx(1.0)

    def test_normalized_sums_to_one(self):
        X, y, w = noisy_data(2, d=5)
        rows = feature_importance(train(WeightedDataset(X, y, w), None, SMALL))
        assert sum(r[2] for r in rows) == pytest.approx(1.0, abs=1e-9)
        assert [r[1] for r in rows] == sorted((r[1] for r in rows), reverse=True)

    def test_stump_free_model(self):
        model = BoostedModel(trees=[], base_score=0.0, best_iteration=0, learning_rate=0.03)
        assert feature_importance(model) == []


class TestGridSearch:
    def data(self):
        X, y = separable(5, 200)
        Xv, yv = separable(6, 100)
        return WeightedDataset(X, y), WeightedDataset(Xv, yv)

    def test_singleton(self):
        data, valid = self.data()
        base = TrainConfig.quick(feature_fraction=1.0, n_estimators_cap=20)
        assert grid_search({"num_leaves": [7]}, data, valid, base) == replace(base, num_leaves=7)

    def test_prefers_the_better_config(self):
        data, valid = self.data()
        base = TrainConfig.quick(feature_fraction=1.0, n_estimators_cap=100)
        best = grid_search({"learning_rate": [0.03, 0.0001], "num_leaves": [31]}, data, valid, base)
        assert best.learning_rate == 0.03 and best.num_leaves == 31

    def test_repeatable(self):
        data, valid = self.data()
        grid = {"learning_rate": [0.03, 0.1], "num_leaves": [4, 31]}
        base = TrainConfig.quick(feature_fraction=1.0, n_estimators_cap=20)
        assert grid_search(grid, data, valid, base) == grid_search(grid, data, valid, base)

    def test_empty_grid(self):
        data, valid = self.data()
        with pytest.raises(BugLocError):
            grid_search({}, data, valid)
