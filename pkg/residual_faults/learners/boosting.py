"""Gradient-boosted regression trees on the logistic loss."""

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from residual_faults.learners.base import as_array, check_training_data, dump_model, load_payload
from residual_faults.learners.trees import Tree, build_tree

logger = logging.getLogger(__name__)

DEFAULT_GBT_CONFIG = {
    "n_rounds": 200,
    "learning_rate": 0.1,
    "max_depth": 4,
    "min_leaf": 1,
}
_EPS = 1e-12


def log_loss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, _EPS, 1 - _EPS)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


@dataclass
class BoostedModel:
    columns: tuple[str, ...]
    config: dict
    seed: int
    base_score: float = 0.0
    trees: list[Tree] = field(default_factory=list)
    loss_curve: list[float] = field(default_factory=list)

    KIND = "gbt"

    def decision_function(self, X) -> np.ndarray:
        arr = as_array(X, self.columns)
        raw = np.full(arr.shape[0], self.base_score)
        rate = float(self.config["learning_rate"])
        for tree in self.trees:
            raw += rate * tree.predict(arr)
        return raw

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.decision_function(X))

    def predict(self, X, threshold: float = 0.5) -> np.ndarray:
        return (self.predict_proba(X) >= threshold).astype(int)

    def dumps(self) -> str:
        body = {
            "base_score": self.base_score,
            "trees": [t.to_dict() for t in self.trees],
            "loss_curve": self.loss_curve,
        }
        return dump_model(self.KIND, self.columns, self.config, self.seed, body)

    @classmethod
    def loads(cls, text: str) -> "BoostedModel":
        payload = load_payload(text, cls.KIND)
        body = payload["body"]
        return cls(
            columns=tuple(payload["columns"]),
            config=payload["config"],
            seed=int(payload["seed"]),
            base_score=float(body["base_score"]),
            trees=[Tree.from_dict(t) for t in body["trees"]],
            loss_curve=[float(v) for v in body["loss_curve"]],
        )


def train_gbt(X, y, config: dict | None = None, seed: int = 0, columns: Sequence[str] | None = None) -> BoostedModel:
    """
    Newton boosting: each round fits a squared-error tree to the residuals
    y - p and sets leaf values to sum(residual) / sum(p(1-p)).
    """
    cfg = {**DEFAULT_GBT_CONFIG, **(config or {})}
    if columns is None:
        columns = getattr(X, "columns", None)
    arr = as_array(X)
    labels = np.asarray(y if y is not None else getattr(X, "labels", None), dtype=float)
    check_training_data(arr, labels.astype(int))
    columns = tuple(columns) if columns is not None else tuple(f"f{i}" for i in range(arr.shape[1]))

    prior = float(np.clip(labels.mean(), _EPS, 1 - _EPS))
    base = float(np.log(prior / (1 - prior)))
    raw = np.full(arr.shape[0], base)
    rate = float(cfg["learning_rate"])
    rows = np.arange(arr.shape[0])
    model = BoostedModel(columns=columns, config=dict(cfg), seed=int(seed), base_score=base)
    for _ in range(int(cfg["n_rounds"])):
        p = expit(raw)
        residual = labels - p
        hessian = p * (1 - p)

        def newton_leaf(leaf_rows, residual=residual, hessian=hessian):
            if leaf_rows.size == 0:
                return 0.0
            return float(residual[leaf_rows].sum() / max(hessian[leaf_rows].sum(), _EPS))

        tree = build_tree(
            arr, residual, rows,
            criterion="sse",
            leaf_value=newton_leaf,
            max_depth=int(cfg["max_depth"]),
            min_leaf=int(cfg["min_leaf"]),
        )
        raw = raw + rate * tree.predict(arr)
        model.trees.append(tree)
        model.loss_curve.append(log_loss(labels, expit(raw)))
    logger.info(
        "Trained boosted trees: %d rounds, final loss %.4f",
        len(model.trees), model.loss_curve[-1] if model.loss_curve else float("nan"),
    )
    return model
