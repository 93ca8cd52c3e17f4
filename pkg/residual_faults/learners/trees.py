"""
Flattened binary decision trees.

One builder grows both Gini classification trees (forest) and squared-error
regression trees (boosting). Rows go left when ``x[feature] <= threshold``.
Ties between candidate splits resolve to the lowest feature index, then
the lowest threshold.
"""

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

LEAF = -1


@dataclass
class Tree:
    feature: list[int] = field(default_factory=list)
    threshold: list[float] = field(default_factory=list)
    left: list[int] = field(default_factory=list)
    right: list[int] = field(default_factory=list)
    value: list[float] = field(default_factory=list)
    n_features: int = 0
    importances: list[float] = field(default_factory=list)

    def _add_leaf(self, value: float) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(float(value))
        return len(self.feature) - 1

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        best = 0
        stack = [(0, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if self.feature[node] != LEAF:
                stack.append((self.left[node], d + 1))
                stack.append((self.right[node], d + 1))
        return best

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        feature = np.asarray(self.feature)
        threshold = np.asarray(self.threshold)
        left = np.asarray(self.left)
        right = np.asarray(self.right)
        nodes = np.zeros(X.shape[0], dtype=int)
        active = feature[nodes] != LEAF
        rows = np.arange(X.shape[0])
        while active.any():
            idx = rows[active]
            cur = nodes[idx]
            go_left = X[idx, feature[cur]] <= threshold[cur]
            nodes[idx] = np.where(go_left, left[cur], right[cur])
            active[idx] = feature[nodes[idx]] != LEAF
        return nodes

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(self.value)[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left,
            "right": self.right,
            "value": self.value,
            "n_features": self.n_features,
            "importances": self.importances,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Tree":
        return cls(
            feature=[int(v) for v in data["feature"]],
            threshold=[float(v) for v in data["threshold"]],
            left=[int(v) for v in data["left"]],
            right=[int(v) for v in data["right"]],
            value=[float(v) for v in data["value"]],
            n_features=int(data["n_features"]),
            importances=[float(v) for v in data["importances"]],
        )


def gini_children(ys: np.ndarray) -> tuple[np.ndarray, float]:
    """Weighted child impurities for every split position of sorted 0/1 targets."""
    m = ys.shape[0]
    pos_left = np.cumsum(ys)[:-1]
    n_left = np.arange(1, m, dtype=float)
    n_right = m - n_left
    pos_right = ys.sum() - pos_left
    p_l = pos_left / n_left
    p_r = pos_right / n_right
    g_l = 2.0 * p_l * (1.0 - p_l)
    g_r = 2.0 * p_r * (1.0 - p_r)
    p = ys.mean()
    return n_left * g_l + n_right * g_r, m * 2.0 * p * (1.0 - p)


def sse_children(ys: np.ndarray) -> tuple[np.ndarray, float]:
    """Child sums of squared error for every split position of sorted targets."""
    m = ys.shape[0]
    c1 = np.cumsum(ys)[:-1]
    c2 = np.cumsum(ys * ys)[:-1]
    n_left = np.arange(1, m, dtype=float)
    n_right = m - n_left
    t1, t2 = ys.sum(), (ys * ys).sum()
    left = c2 - c1 * c1 / n_left
    right = (t2 - c2) - (t1 - c1) ** 2 / n_right
    return left + right, t2 - t1 * t1 / m


CRITERIA: dict[str, Callable] = {"gini": gini_children, "sse": sse_children}


def _best_split(X, target, idx, features, criterion, min_leaf):
    best = None  # (impurity, feature, threshold)
    node_impurity = None
    m = idx.shape[0]
    for f in features:
        x = X[idx, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        ys = target[idx][order]
        children, node_impurity = criterion(ys)
        n_left = np.arange(1, m)
        valid = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (m - n_left >= min_leaf)
        if not valid.any():
            continue
        scores = np.where(valid, children, np.inf)
        pos = int(np.argmin(scores))
        score = float(scores[pos])
        if best is None or score < best[0] - 1e-12:
            lo, hi = xs[pos], xs[pos + 1]
            threshold = (lo + hi) / 2.0
            if not lo <= threshold < hi:
                threshold = lo
            best = (score, int(f), float(threshold))
    return best, node_impurity


def build_tree(
    X: np.ndarray,
    target: np.ndarray,
    idx: np.ndarray,
    *,
    criterion: str,
    leaf_value: Callable[[np.ndarray], float],
    rng: np.random.Generator | None = None,
    max_depth: int | None = None,
    min_leaf: int = 1,
    max_features: int | None = None,
    min_impurity: float = 1e-12,
) -> Tree:
    """Grow a tree over rows ``idx`` (may repeat, e.g. a bootstrap sample)."""
    n_features = X.shape[1]
    k = n_features if not max_features else min(max(1, int(max_features)), n_features)
    crit = CRITERIA[criterion]
    tree = Tree(n_features=n_features, importances=[0.0] * n_features)

    root_rows = np.asarray(idx, dtype=int)
    stack = [(tree._add_leaf(leaf_value(root_rows)), root_rows, 0)]
    while stack:
        node, rows, depth = stack.pop()
        if (max_depth is not None and depth >= max_depth) or rows.shape[0] < 2 * min_leaf:
            continue
        if k < n_features and rng is not None:
            features = np.sort(rng.choice(n_features, size=k, replace=False))
        else:
            features = np.arange(n_features)
        best, node_impurity = _best_split(X, target, rows, features, crit, min_leaf)
        if best is None or node_impurity is None or node_impurity <= min_impurity:
            continue
        score, f, threshold = best
        mask = X[rows, f] <= threshold
        left_rows, right_rows = rows[mask], rows[~mask]
        tree.feature[node] = f
        tree.threshold[node] = threshold
        tree.importances[f] += max(node_impurity - score, 0.0)
        tree.left[node] = tree._add_leaf(leaf_value(left_rows))
        tree.right[node] = tree._add_leaf(leaf_value(right_rows))
        # right pushed first so the left subtree is expanded first
        stack.append((tree.right[node], right_rows, depth + 1))
        stack.append((tree.left[node], left_rows, depth + 1))
    return tree
