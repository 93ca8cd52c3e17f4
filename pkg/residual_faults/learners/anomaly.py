"""
Unsupervised detectors: isolation forest and local outlier factor.

Both treat residual faults as the anomalous class: ``predict`` returns 1
for points scored as outliers.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from residual_faults.errors import InputError
from residual_faults.learners.base import as_array, check_training_data, dump_model, load_payload
from residual_faults.learners.trees import Tree

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329
DEFAULT_IF_CONFIG = {"n_trees": 100, "subsample": 256, "contamination": 0.5, "n_jobs": 1}
DEFAULT_LOF_CONFIG = {"k": 20, "threshold": 1.5}
_DENSITY_EPS = 1e-10


def average_path_length(n: int) -> float:
    """Expected path length of an unsuccessful BST search over n points."""
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    return 2.0 * (math.log(n - 1) + EULER_GAMMA) - 2.0 * (n - 1) / n


def _isolation_tree(X: np.ndarray, rows: np.ndarray, rng: np.random.Generator, height_limit: int) -> Tree:
    """Random-split tree; a leaf's value is its depth plus c(leaf size)."""
    tree = Tree(n_features=X.shape[1], importances=[0.0] * X.shape[1])
    root = tree._add_leaf(0.0)
    stack = [(root, rows, 0)]
    while stack:
        node, idx, depth = stack.pop()
        tree.value[node] = depth + average_path_length(idx.size)
        if depth >= height_limit or idx.size <= 1:
            continue
        sub = X[idx]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        candidates = np.flatnonzero(hi > lo)
        if candidates.size == 0:
            continue
        f = int(rng.choice(candidates))
        threshold = float(rng.uniform(lo[f], hi[f]))
        mask = sub[:, f] <= threshold
        if mask.all() or not mask.any():
            continue
        tree.feature[node] = f
        tree.threshold[node] = threshold
        tree.left[node] = tree._add_leaf(0.0)
        tree.right[node] = tree._add_leaf(0.0)
        stack.append((tree.right[node], idx[~mask], depth + 1))
        stack.append((tree.left[node], idx[mask], depth + 1))
    return tree


@dataclass
class IsolationModel:
    columns: tuple[str, ...]
    config: dict
    seed: int
    sample_size: int
    threshold: float = 0.5
    trees: list[Tree] = field(default_factory=list)

    KIND = "isolation_forest"

    def anomaly_score(self, X) -> np.ndarray:
        arr = as_array(X, self.columns)
        paths = np.zeros(arr.shape[0])
        for tree in self.trees:
            paths += tree.predict(arr)
        mean_path = paths / max(1, len(self.trees))
        norm = average_path_length(self.sample_size) or 1.0
        return np.power(2.0, -mean_path / norm)

    def predict_proba(self, X) -> np.ndarray:
        return self.anomaly_score(X)

    def predict(self, X) -> np.ndarray:
        return (self.anomaly_score(X) >= self.threshold).astype(int)

    def dumps(self) -> str:
        body = {
            "sample_size": self.sample_size,
            "threshold": self.threshold,
            "trees": [t.to_dict() for t in self.trees],
        }
        return dump_model(self.KIND, self.columns, self.config, self.seed, body)

    @classmethod
    def loads(cls, text: str) -> "IsolationModel":
        payload = load_payload(text, cls.KIND)
        body = payload["body"]
        return cls(
            columns=tuple(payload["columns"]),
            config=payload["config"],
            seed=int(payload["seed"]),
            sample_size=int(body["sample_size"]),
            threshold=float(body["threshold"]),
            trees=[Tree.from_dict(t) for t in body["trees"]],
        )


def fit_isolation_forest(X, config: dict | None = None, seed: int = 0, columns: Sequence[str] | None = None) -> IsolationModel:
    """
    Subsamples larger than the data are clamped to n. The outlier threshold
    is the (1 - contamination) quantile of the training scores.
    """
    cfg = {**DEFAULT_IF_CONFIG, **(config or {})}
    if columns is None:
        columns = getattr(X, "columns", None)
    arr = as_array(X)
    check_training_data(arr, supervised=False)
    columns = tuple(columns) if columns is not None else tuple(f"f{i}" for i in range(arr.shape[1]))
    n = arr.shape[0]
    psi = min(int(cfg["subsample"]), n)
    height_limit = max(1, math.ceil(math.log2(psi))) if psi > 1 else 0

    def grow(t: int) -> Tree:
        rng = np.random.default_rng([seed, t])
        rows = rng.choice(n, size=psi, replace=False)
        return _isolation_tree(arr, rows, rng, height_limit)

    n_jobs = max(1, int(cfg.get("n_jobs") or 1))
    if n_jobs == 1:
        trees = [grow(t) for t in range(int(cfg["n_trees"]))]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(grow, range(int(cfg["n_trees"]))))
    stored = {key: value for key, value in cfg.items() if key != "n_jobs"}
    model = IsolationModel(columns=columns, config=stored, seed=int(seed), sample_size=psi, trees=trees)
    contamination = float(cfg["contamination"])
    if not 0.0 < contamination < 1.0:
        raise InputError(f"contamination must be in (0, 1), got {contamination}")
    model.threshold = float(np.quantile(model.anomaly_score(arr), 1.0 - contamination))
    logger.info("Fitted isolation forest: %d trees, subsample %d", len(trees), psi)
    return model


def anomaly_score(model: IsolationModel, x) -> np.ndarray:
    return model.anomaly_score(x)


@dataclass
class LofModel:
    columns: tuple[str, ...]
    config: dict
    points: np.ndarray
    k_distance: np.ndarray
    lrd: np.ndarray
    training_scores: np.ndarray

    KIND = "lof"

    @property
    def k(self) -> int:
        return int(self.config["k"])

    def score(self, X) -> np.ndarray:
        """LOF of query points; the fitted points themselves get their in-sample scores."""
        arr = as_array(X, self.columns)
        if arr.shape == self.points.shape and np.array_equal(arr, self.points):
            return self.training_scores.copy()
        dist = cdist(arr, self.points)
        neighbours = np.argsort(dist, axis=1, kind="stable")[:, : self.k]
        reach = np.maximum(
            np.take_along_axis(dist, neighbours, axis=1), self.k_distance[neighbours]
        )
        lrd = 1.0 / np.maximum(reach.mean(axis=1), _DENSITY_EPS)
        return self.lrd[neighbours].mean(axis=1) / lrd

    def predict_proba(self, X) -> np.ndarray:
        return self.score(X)

    def predict(self, X) -> np.ndarray:
        return (self.score(X) > float(self.config["threshold"])).astype(int)

    def dumps(self) -> str:
        body = {
            "points": self.points.tolist(),
            "k_distance": self.k_distance.tolist(),
            "lrd": self.lrd.tolist(),
            "training_scores": self.training_scores.tolist(),
        }
        return dump_model(self.KIND, self.columns, self.config, 0, body)

    @classmethod
    def loads(cls, text: str) -> "LofModel":
        payload = load_payload(text, cls.KIND)
        body = payload["body"]
        return cls(
            columns=tuple(payload["columns"]),
            config=payload["config"],
            points=np.asarray(body["points"], dtype=float),
            k_distance=np.asarray(body["k_distance"], dtype=float),
            lrd=np.asarray(body["lrd"], dtype=float),
            training_scores=np.asarray(body["training_scores"], dtype=float),
        )


def fit_lof(X, k: int | None = None, config: dict | None = None, columns: Sequence[str] | None = None) -> LofModel:
    cfg = {**DEFAULT_LOF_CONFIG, **(config or {})}
    if k is not None:
        cfg["k"] = int(k)
    if columns is None:
        columns = getattr(X, "columns", None)
    arr = as_array(X)
    check_training_data(arr, supervised=False)
    columns = tuple(columns) if columns is not None else tuple(f"f{i}" for i in range(arr.shape[1]))
    n, k = arr.shape[0], int(cfg["k"])
    if k < 1 or k >= n:
        raise InputError(f"LOF needs 1 <= k < n, got k={k}, n={n}")
    dist = cdist(arr, arr)
    np.fill_diagonal(dist, np.inf)
    neighbours = np.argsort(dist, axis=1, kind="stable")[:, :k]
    neighbour_dist = np.take_along_axis(dist, neighbours, axis=1)
    k_distance = neighbour_dist[:, -1]
    reach = np.maximum(neighbour_dist, k_distance[neighbours])
    lrd = 1.0 / np.maximum(reach.mean(axis=1), _DENSITY_EPS)
    scores = lrd[neighbours].mean(axis=1) / lrd
    return LofModel(
        columns=columns,
        config=cfg,
        points=arr.copy(),
        k_distance=k_distance,
        lrd=lrd,
        training_scores=scores,
    )


def lof_score(model: LofModel, x) -> np.ndarray:
    return model.score(x)
