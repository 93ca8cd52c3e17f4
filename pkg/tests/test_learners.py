"""
Tests for residual_faults.learners: scaler, trees, forest, boosting and detectors.
"""
import json
import math

import numpy as np
import pytest

from residual_faults.errors import InputError, SchemaMismatchError
from residual_faults.evaluation import classification_metrics, confusion
from residual_faults.learners import (
    FeatureMatrix,
    apply_scaler,
    fit_isolation_forest,
    fit_lof,
    fit_scaler,
    load_model,
    predict,
    train_gbt,
    train_random_forest,
)
from residual_faults.learners.anomaly import average_path_length
from residual_faults.learners.trees import LEAF, build_tree

COLUMNS = ("size", "noise")


@pytest.fixture
def separable():
    """Two clusters far apart on the first feature; the second is noise."""
    low = [[0.1 * i, i % 3] for i in range(10)]
    high = [[10 + 0.1 * i, i % 3] for i in range(10)]
    X = np.array(low + high, dtype=float)
    y = np.array([0] * 10 + [1] * 10)
    return FeatureMatrix(X, COLUMNS, y)


@pytest.fixture
def cloud_with_outlier():
    rng = np.random.default_rng(3)
    inliers = rng.normal(0.0, 0.5, size=(50, 2))
    return np.vstack([inliers, [[50.0, 50.0]]])


SQUARE = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])


class TestFeatureMatrix:
    """Tests for matrix validation."""

    def test_rejects_non_finite_values(self):
        with pytest.raises(InputError):
            FeatureMatrix(np.array([[1.0, np.nan]]), COLUMNS)

    def test_rejects_wrong_column_count(self):
        with pytest.raises(InputError):
            FeatureMatrix(np.zeros((2, 3)), COLUMNS)

    def test_rejects_duplicate_columns(self):
        with pytest.raises(InputError):
            FeatureMatrix(np.zeros((2, 2)), ("a", "a"))

    def test_rejects_label_length_mismatch(self):
        with pytest.raises(InputError):
            FeatureMatrix(np.zeros((2, 2)), COLUMNS, [0, 1, 1])


class TestScaler:
    """Tests for standardisation."""

    def test_fit_and_apply(self):
        params = fit_scaler(np.array([[1.0, 5.0], [3.0, 5.0]]))
        assert params.mean.tolist() == [2.0, 5.0]
        assert params.std.tolist() == [1.0, 0.0]
        assert params.constant.tolist() == [False, True]
        out = apply_scaler(params, np.array([[1.0, 5.0], [3.0, 7.0]]))
        assert out.tolist() == [[-1.0, 0.0], [1.0, 0.0]]

    def test_column_mismatch(self):
        params = fit_scaler(np.ones((3, 2)))
        with pytest.raises(InputError):
            apply_scaler(params, np.ones((3, 3)))

    def test_empty_matrix(self):
        with pytest.raises(InputError):
            fit_scaler(np.zeros((0, 2)))


class TestBuildTree:
    """Tests for the shared tree builder."""

    def test_single_split(self):
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        target = np.array([0.0, 0.0, 1.0, 1.0])
        tree = build_tree(
            X, target, np.arange(4),
            criterion="gini",
            leaf_value=lambda rows: float(target[rows].mean()),
        )
        assert tree.feature[0] == 0
        assert tree.threshold[0] == 1.5
        assert tree.depth() == 1
        assert tree.feature[tree.left[0]] == LEAF
        assert tree.predict(np.array([[0.5], [2.5]])).tolist() == [0.0, 1.0]
        assert tree.importances == [pytest.approx(2.0)]

    def test_pure_node_is_a_leaf(self):
        X = np.array([[0.0], [1.0]])
        target = np.array([1.0, 1.0])
        tree = build_tree(X, target, np.arange(2), criterion="gini", leaf_value=lambda rows: 1.0)
        assert tree.n_nodes == 1

    def test_max_depth(self):
        X = np.arange(8, dtype=float).reshape(-1, 1)
        target = np.array([0, 1, 0, 1, 0, 1, 0, 1], dtype=float)
        tree = build_tree(
            X, target, np.arange(8),
            criterion="sse",
            leaf_value=lambda rows: float(target[rows].mean()),
            max_depth=2,
        )
        assert tree.depth() <= 2


class TestRandomForest:
    """Tests for the random forest."""

    CONFIG = {"n_trees": 10, "features_per_split": "all", "min_leaf": 1}

    def test_fits_separable_data(self, separable):
        model = train_random_forest(separable, None, self.CONFIG, seed=1)
        assert model.columns == COLUMNS
        assert predict(model, separable).tolist() == separable.labels.tolist()

    def test_same_seed_same_model(self, separable):
        a = train_random_forest(separable, None, {**self.CONFIG, "features_per_split": "sqrt"}, seed=5)
        b = train_random_forest(separable, None, {**self.CONFIG, "features_per_split": "sqrt"}, seed=5)
        assert a.dumps() == b.dumps()

    def test_parallel_training_matches_serial(self, separable):
        serial = train_random_forest(separable, None, self.CONFIG, seed=2)
        parallel = train_random_forest(separable, None, {**self.CONFIG, "n_jobs": 3}, seed=2)
        assert serial.dumps() == parallel.dumps()

    def test_round_trip(self, separable):
        model = train_random_forest(separable, None, self.CONFIG, seed=1)
        restored = load_model(model.dumps())
        assert np.array_equal(restored.predict_proba(separable), model.predict_proba(separable))

    def test_schema_mismatch(self, separable):
        model = train_random_forest(separable, None, self.CONFIG, seed=1)
        other = FeatureMatrix(separable.values, ("noise", "size"))
        with pytest.raises(SchemaMismatchError):
            model.predict_proba(other)

    def test_single_class_rejected(self, separable):
        with pytest.raises(InputError):
            train_random_forest(separable.values, np.zeros(20, dtype=int), self.CONFIG)

    def test_non_binary_labels_rejected(self, separable):
        with pytest.raises(InputError):
            train_random_forest(separable.values, np.arange(20) % 3, self.CONFIG)


class TestBoosting:
    """Tests for gradient-boosted trees."""

    CONFIG = {"n_rounds": 20, "max_depth": 2}

    def test_fits_separable_data(self, separable):
        model = train_gbt(separable, None, self.CONFIG)
        assert predict(model, separable).tolist() == separable.labels.tolist()

    def test_base_score_is_prior_log_odds(self, separable):
        model = train_gbt(separable, None, {"n_rounds": 0})
        assert model.base_score == pytest.approx(0.0)
        assert np.allclose(model.predict_proba(separable), 0.5)

    def test_training_loss_decreases(self, separable):
        curve = train_gbt(separable, None, self.CONFIG).loss_curve
        assert len(curve) == 20
        assert all(b <= a + 1e-12 for a, b in zip(curve, curve[1:]))

    def test_round_trip(self, separable):
        model = train_gbt(separable, None, self.CONFIG)
        restored = load_model(model.dumps())
        assert np.allclose(restored.predict_proba(separable), model.predict_proba(separable))


class TestIsolationForest:
    """Tests for the isolation forest."""

    CONFIG = {"n_trees": 50, "subsample": 32, "contamination": 0.1}

    def test_average_path_length(self):
        assert average_path_length(1) == 0.0
        assert average_path_length(2) == 1.0
        expected = 2 * (math.log(255) + 0.5772156649015329) - 2 * 255 / 256
        assert average_path_length(256) == pytest.approx(expected)

    def test_outlier_scores_highest(self, cloud_with_outlier):
        model = fit_isolation_forest(cloud_with_outlier, self.CONFIG, seed=0)
        scores = model.anomaly_score(cloud_with_outlier)
        assert int(np.argmax(scores)) == len(cloud_with_outlier) - 1
        assert model.predict(cloud_with_outlier)[-1] == 1
        assert np.all((scores > 0) & (scores < 1))

    def test_subsample_clamped(self, cloud_with_outlier):
        model = fit_isolation_forest(cloud_with_outlier, {**self.CONFIG, "subsample": 1000})
        assert model.sample_size == len(cloud_with_outlier)

    def test_parallel_matches_serial(self, cloud_with_outlier):
        serial = fit_isolation_forest(cloud_with_outlier, self.CONFIG, seed=4)
        parallel = fit_isolation_forest(cloud_with_outlier, {**self.CONFIG, "n_jobs": 2}, seed=4)
        assert serial.dumps() == parallel.dumps()

    def test_invalid_contamination(self, cloud_with_outlier):
        with pytest.raises(InputError):
            fit_isolation_forest(cloud_with_outlier, {**self.CONFIG, "contamination": 1.0})

    def test_round_trip(self, cloud_with_outlier):
        model = fit_isolation_forest(cloud_with_outlier, self.CONFIG, seed=0)
        restored = load_model(model.dumps())
        assert restored.threshold == model.threshold
        assert np.allclose(restored.anomaly_score(cloud_with_outlier), model.anomaly_score(cloud_with_outlier))


class TestLocalOutlierFactor:
    """Tests for LOF on the unit square."""

    def test_symmetric_points_score_one(self):
        model = fit_lof(SQUARE, k=2)
        assert np.allclose(model.training_scores, 1.0)
        assert predict(model, SQUARE).tolist() == [0, 0, 0, 0]

    def test_far_point(self):
        model = fit_lof(SQUARE, k=2)
        expected = (math.sqrt(200) + math.sqrt(181)) / 2
        assert model.score(np.array([[10.0, 10.0]]))[0] == pytest.approx(expected)
        assert model.predict(np.array([[10.0, 10.0]])).tolist() == [1]

    def test_fitted_points_exclude_themselves(self):
        line = np.array([[0.0], [1.0], [3.0]])
        model = fit_lof(line, k=1)
        assert model.score(line).tolist() == pytest.approx([1.0, 1.0, 2.0])
        assert model.predict(line).tolist() == [0, 0, 1]

    @pytest.mark.parametrize("k", [0, 4])
    def test_k_out_of_range(self, k):
        with pytest.raises(InputError):
            fit_lof(SQUARE, k=k)

    def test_round_trip(self):
        model = fit_lof(SQUARE, k=2)
        restored = load_model(model.dumps())
        assert restored.k == 2
        assert np.allclose(restored.score(SQUARE), model.score(SQUARE))


class TestLoadModel:
    """Tests for model text validation."""

    def test_unknown_type(self):
        with pytest.raises(InputError):
            load_model(json.dumps({"type": "svm"}))

    def test_tampered_columns(self):
        payload = json.loads(fit_lof(SQUARE, k=2).dumps())
        payload["columns"] = ["x", "y"]
        with pytest.raises(SchemaMismatchError):
            load_model(json.dumps(payload))


@pytest.fixture(scope="module")
def separable_at_scale():
    """2000 rows, 10 features; the label is the sign of f0 + f1, pushed apart by a margin."""
    rng = np.random.default_rng(11)
    X = rng.normal(size=(2000, 10))
    y = (X[:, 0] + X[:, 1] > 0).astype(int)
    shift = np.where(y == 1, 1.0, -1.0)
    X[:, 0] += shift
    X[:, 1] += shift
    return X, y


@pytest.fixture(scope="module")
def cloud_with_outliers_at_scale():
    """1995 standard-normal inliers followed by five far corners of the 10-d cube."""
    rng = np.random.default_rng(12)
    inliers = rng.normal(size=(1995, 10))
    signs = np.array([[1] * 10, [-1] * 10, [1, -1] * 5, [-1, 1] * 5, [1] * 5 + [-1] * 5], dtype=float)
    return np.vstack([inliers, 8.0 * signs])


class TestSyntheticScale:
    """Learners on larger synthetic data with a fixed seed."""

    def _f1(self, model, X, y):
        return classification_metrics(confusion(predict(model, X), y))["f1"]

    def test_random_forest_f1(self, separable_at_scale):
        X, y = separable_at_scale
        model = train_random_forest(X[:1500], y[:1500], {"n_trees": 30, "min_leaf": 1}, seed=0)
        assert self._f1(model, X[1500:], y[1500:]) >= 0.95

    def test_gbt_f1(self, separable_at_scale):
        X, y = separable_at_scale
        model = train_gbt(X[:1500], y[:1500], {"n_rounds": 50, "max_depth": 3}, seed=0)
        assert self._f1(model, X[1500:], y[1500:]) >= 0.95

    def test_isolation_forest_ranks_outliers_first(self, cloud_with_outliers_at_scale):
        X = cloud_with_outliers_at_scale
        model = fit_isolation_forest(X, {"n_trees": 100, "subsample": 256, "contamination": 0.01}, seed=0)
        scores = model.anomaly_score(X)
        assert set(np.argsort(scores)[-5:].tolist()) == set(range(1995, 2000))

    def test_lof_ranks_outliers_first(self, cloud_with_outliers_at_scale):
        X = cloud_with_outliers_at_scale
        model = fit_lof(X, k=20)
        scores = model.score(X)
        assert set(np.argsort(scores)[-5:].tolist()) == set(range(1995, 2000))
        assert model.predict(X)[1995:].tolist() == [1] * 5
