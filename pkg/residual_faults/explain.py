"""
Feature importance for trained models: Gini/variance decrease from the
trees, permutation drop on labelled data and Monte-Carlo Shapley values.
"""

import logging
from typing import Callable, Sequence

import numpy as np

from residual_faults.errors import InputError
from residual_faults.evaluation import METRICS, classification_metrics, confusion
from residual_faults.learners.base import as_array

logger = logging.getLogger(__name__)

SHAPLEY_CHUNK = 4096


def impurity_importance(model) -> np.ndarray:
    """
    Per-tree impurity decreases normalised to 1, averaged over trees and
    normalised again. Trees without splits contribute nothing; a model with
    no split at all gets uniform weights.
    """
    trees = getattr(model, "trees", None)
    if not trees:
        raise InputError("impurity importance needs a tree ensemble")
    n_features = trees[0].n_features
    total = np.zeros(n_features)
    for tree in trees:
        weights = np.asarray(tree.importances, dtype=float)
        s = weights.sum()
        if s > 0:
            total += weights / s
    s = total.sum()
    if s <= 0:
        return np.full(n_features, 1.0 / n_features)
    return total / s


def _score(model, X, y, metric: str) -> float:
    if metric not in METRICS:
        raise InputError(f"unknown metric {metric!r}")
    return classification_metrics(confusion(model.predict(X), y))[metric]


def permutation_importance(model, X, y, metric: str = "f1", seed: int = 0, repeats: int = 5) -> np.ndarray:
    """Mean drop of ``metric`` when each column is shuffled, ``repeats`` times."""
    arr = as_array(X).copy()
    labels = np.asarray(y, dtype=int)
    base = _score(model, arr, labels, metric)
    drops = np.zeros(arr.shape[1])
    for j in range(arr.shape[1]):
        rng = np.random.default_rng([seed, j])
        original = arr[:, j].copy()
        for _ in range(int(repeats)):
            arr[:, j] = rng.permutation(original)
            drops[j] += base - _score(model, arr, labels, metric)
        arr[:, j] = original
    return drops / max(1, int(repeats))


def _model_fn(model) -> Callable[[np.ndarray], np.ndarray]:
    if callable(model) and not hasattr(model, "predict_proba"):
        return model
    return model.predict_proba


def shapley_mc(model, x, background, n_samples: int = 10_000, seed: int = 0) -> np.ndarray:
    """
    Permutation-sampling Shapley estimate for one row ``x``.

    Sample s walks a random feature order starting from background row
    ``s mod len(background)``, switching features to ``x`` one at a time;
    each feature collects the change in model output it caused. Each walk's
    contributions sum to f(x) - f(background row), so with ``n_samples`` a
    multiple of the background size the total equals f(x) minus the mean
    background output.
    """
    f = _model_fn(model)
    x = as_array(x)[0]
    bg = as_array(background)
    if bg.shape[0] == 0:
        raise InputError("background must contain at least one row")
    if bg.shape[1] != x.shape[0]:
        raise InputError("background and x have different widths")
    d = x.shape[0]
    rng = np.random.default_rng(seed)
    phi = np.zeros(d)
    done = 0
    while done < n_samples:
        m = min(SHAPLEY_CHUNK, n_samples - done)
        orders = np.argsort(rng.random((m, d)), axis=1)
        starts = bg[(done + np.arange(m)) % bg.shape[0]]
        # rows s*(d+1) + t hold the walk of sample s after t switches
        points = np.repeat(starts, d + 1, axis=0).reshape(m, d + 1, d)
        for t in range(d):
            cols = orders[:, t]
            points[np.arange(m), t + 1:, cols] = x[cols][:, None]
        values = np.asarray(f(points.reshape(-1, d)), dtype=float).reshape(m, d + 1)
        deltas = np.diff(values, axis=1)
        np.add.at(phi, orders.ravel(), deltas.ravel())
        done += m
    return phi / n_samples


def shapley_direction_summary(model, X_test, background, n_samples: int = 1_000, seed: int = 0) -> np.ndarray:
    """Mean signed Shapley contribution per feature over the test rows."""
    rows = as_array(X_test)
    if rows.shape[0] == 0:
        raise InputError("no test rows to explain")
    total = np.zeros(rows.shape[1])
    for i, row in enumerate(rows):
        total += shapley_mc(model, row, background, n_samples=n_samples, seed=seed + i)
    return total / rows.shape[0]


def top_features(weights, names: Sequence[str], n: int = 10) -> list[tuple[str, float]]:
    """Highest weights first, ties broken by name."""
    pairs = sorted(zip(names, (float(w) for w in weights)), key=lambda p: (-p[1], p[0]))
    return pairs[:n]
