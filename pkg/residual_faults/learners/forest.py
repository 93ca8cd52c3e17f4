"""Random forest of Gini CART trees on bootstrap samples."""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from residual_faults.learners.base import as_array, check_training_data, dump_model, load_payload
from residual_faults.learners.trees import Tree, build_tree

logger = logging.getLogger(__name__)

DEFAULT_FOREST_CONFIG = {
    "n_trees": 300,
    "max_depth": None,
    "min_leaf": 2,
    "features_per_split": "sqrt",
    "n_jobs": 1,
}


def resolve_features_per_split(value, n_features: int) -> int:
    if value in (None, "all"):
        return n_features
    if value == "sqrt":
        return max(1, int(math.sqrt(n_features)))
    if value == "log2":
        return max(1, int(math.log2(n_features))) if n_features > 1 else 1
    return min(max(1, int(value)), n_features)


@dataclass
class ForestModel:
    columns: tuple[str, ...]
    config: dict
    seed: int
    trees: list[Tree] = field(default_factory=list)

    KIND = "random_forest"

    def predict_proba(self, X) -> np.ndarray:
        arr = as_array(X, self.columns)
        if not self.trees:
            return np.zeros(arr.shape[0])
        total = np.zeros(arr.shape[0])
        for tree in self.trees:
            total += tree.predict(arr)
        return np.clip(total / len(self.trees), 0.0, 1.0)

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) >= threshold).astype(int)

    def dumps(self) -> str:
        return dump_model(self.KIND, self.columns, self.config, self.seed, {"trees": [t.to_dict() for t in self.trees]})

    @classmethod
    def loads(cls, text: str) -> "ForestModel":
        payload = load_payload(text, cls.KIND)
        return cls(
            columns=tuple(payload["columns"]),
            config=payload["config"],
            seed=int(payload["seed"]),
            trees=[Tree.from_dict(t) for t in payload["body"]["trees"]],
        )


def train_random_forest(X, y, config: dict | None = None, seed: int = 0, columns: Sequence[str] | None = None) -> ForestModel:
    """
    Train ``n_trees`` trees, each on a bootstrap sample with its own RNG
    stream derived from (seed, tree index), so ``n_jobs`` never changes the result.
    """
    cfg = {**DEFAULT_FOREST_CONFIG, **(config or {})}
    if columns is None:
        columns = getattr(X, "columns", None)
    arr = as_array(X)
    labels = np.asarray(y if y is not None else getattr(X, "labels", None), dtype=int)
    check_training_data(arr, labels)
    columns = tuple(columns) if columns is not None else tuple(f"f{i}" for i in range(arr.shape[1]))
    n = arr.shape[0]
    k = resolve_features_per_split(cfg["features_per_split"], arr.shape[1])
    target = labels.astype(float)

    def grow(t: int) -> Tree:
        rng = np.random.default_rng([seed, t])
        sample = rng.integers(0, n, size=n)
        return build_tree(
            arr, target, sample,
            criterion="gini",
            leaf_value=lambda rows: float(target[rows].mean()) if rows.size else 0.0,
            rng=rng,
            max_depth=cfg["max_depth"],
            min_leaf=int(cfg["min_leaf"]),
            max_features=k,
        )

    n_jobs = max(1, int(cfg.get("n_jobs") or 1))
    if n_jobs == 1:
        trees = [grow(t) for t in range(int(cfg["n_trees"]))]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(grow, range(int(cfg["n_trees"]))))
    stored = {key: value for key, value in cfg.items() if key != "n_jobs"}
    logger.info("Trained random forest: %d trees, %d rows, %d features", len(trees), n, arr.shape[1])
    return ForestModel(columns=columns, config=stored, seed=int(seed), trees=trees)
