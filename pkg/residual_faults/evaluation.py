"""
Evaluation statistics: confusion matrices, accuracy/precision/recall/F1
with percentile-bootstrap confidence intervals, and McNemar's test.

The positive class is 1 (residual fault). Precision, recall and F1 are 0
whenever their denominator is 0.
"""

import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from statsmodels.stats.contingency_tables import mcnemar as sm_mcnemar

from residual_faults.errors import InputError

logger = logging.getLogger(__name__)

METRICS = ("accuracy", "precision", "recall", "f1")
EXACT_MCNEMAR_LIMIT = 25
DEFAULT_RESAMPLES = 10_000


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass
class EvalReport:
    model: str
    confusion: ConfusionMatrix
    accuracy: float
    precision: float
    recall: float
    f1: float
    ci: dict[str, tuple[float, float]] = field(default_factory=dict)
    n_resamples: int = 0
    seed: int | None = None

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "confusion": {"tp": self.confusion.tp, "fp": self.confusion.fp, "fn": self.confusion.fn, "tn": self.confusion.tn},
            **{m: getattr(self, m) for m in METRICS},
            "ci": {m: list(self.ci[m]) for m in METRICS if m in self.ci},
            "n_resamples": self.n_resamples,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class McNemarResult:
    b: int
    c: int
    p_value: float
    method: str
    statistic: float

    def to_dict(self) -> dict:
        return {"b": self.b, "c": self.c, "p_value": self.p_value, "method": self.method, "statistic": self.statistic}


def _binary(values, name: str) -> np.ndarray:
    arr = np.asarray(values).astype(int).ravel()
    if arr.size and not set(np.unique(arr).tolist()) <= {0, 1}:
        raise InputError(f"{name} must be binary 0/1")
    return arr


def confusion(preds, labels) -> ConfusionMatrix:
    p = _binary(preds, "predictions")
    y = _binary(labels, "labels")
    if p.shape != y.shape:
        raise InputError(f"predictions ({p.size}) and labels ({y.size}) differ in length")
    return ConfusionMatrix(
        tp=int(np.sum((p == 1) & (y == 1))),
        fp=int(np.sum((p == 1) & (y == 0))),
        fn=int(np.sum((p == 0) & (y == 1))),
        tn=int(np.sum((p == 0) & (y == 0))),
    )


def _safe_div(num, den):
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def _metric_arrays(tp, fp, fn, tn) -> dict[str, np.ndarray]:
    precision = _safe_div(tp, tp + fp)
    recall = _safe_div(tp, tp + fn)
    return {
        "accuracy": _safe_div(tp + tn, tp + fp + fn + tn),
        "precision": precision,
        "recall": recall,
        "f1": _safe_div(2 * precision * recall, precision + recall),
    }


def classification_metrics(cm: ConfusionMatrix) -> dict[str, float]:
    if cm.total <= 0:
        raise InputError("cannot compute metrics on an empty confusion matrix")
    values = _metric_arrays(cm.tp, cm.fp, cm.fn, cm.tn)
    return {m: float(values[m]) for m in METRICS}


def bootstrap_distribution(preds, labels, metric: str | Callable, n_resamples: int, seed: int) -> np.ndarray:
    """Metric value on each of ``n_resamples`` index resamples."""
    p = _binary(preds, "predictions")
    y = _binary(labels, "labels")
    n = p.size
    if n < 2:
        raise InputError("bootstrap needs at least two samples")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(int(n_resamples), n))
    bp, by = p[idx], y[idx]
    if callable(metric):
        return np.array([metric(bp[i], by[i]) for i in range(bp.shape[0])], dtype=float)
    if metric not in METRICS:
        raise InputError(f"unknown metric {metric!r}")
    tp = np.sum((bp == 1) & (by == 1), axis=1)
    fp = np.sum((bp == 1) & (by == 0), axis=1)
    fn = np.sum((bp == 0) & (by == 1), axis=1)
    tn = np.sum((bp == 0) & (by == 0), axis=1)
    return _metric_arrays(tp, fp, fn, tn)[metric]


def bootstrap_ci(preds, labels, metric: str | Callable, n_resamples: int = DEFAULT_RESAMPLES, seed: int = 0, level: float = 0.95) -> tuple[float, float]:
    """Percentile bootstrap interval over sample indices."""
    values = bootstrap_distribution(preds, labels, metric, n_resamples, seed)
    alpha = (1.0 - level) / 2.0
    low, high = np.percentile(values, [100 * alpha, 100 * (1 - alpha)])
    return float(low), float(high)


def evaluate_model(name: str, preds, labels, n_resamples: int = DEFAULT_RESAMPLES, seed: int = 0, level: float = 0.95) -> EvalReport:
    cm = confusion(preds, labels)
    point = classification_metrics(cm)
    report = EvalReport(model=name, confusion=cm, n_resamples=int(n_resamples), seed=seed, **point)
    p = _binary(preds, "predictions")
    y = _binary(labels, "labels")
    if p.size >= 2 and n_resamples > 0:
        for i, metric in enumerate(METRICS):
            low, high = bootstrap_ci(p, y, metric, n_resamples, seed + i, level)
            report.ci[metric] = (min(low, point[metric]), max(high, point[metric]))
    else:
        report.ci = {m: (point[m], point[m]) for m in METRICS}
    return report


def render_eval_table(reports: Sequence[EvalReport]) -> str:
    """Plain-text table: one row per model, ``value[low,high]`` cells."""
    headers = ("model", *METRICS)
    rows = []
    for r in reports:
        cells = [r.model]
        for m in METRICS:
            low, high = r.ci.get(m, (getattr(r, m), getattr(r, m)))
            cells.append(f"{getattr(r, m):.3f}[{low:.3f},{high:.3f}]")
        rows.append(cells)
    widths = [max(len(h), *(len(row[i]) for row in rows)) if rows else len(h) for i, h in enumerate(headers)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)))
    return "\n".join(lines) + "\n"


def mcnemar(preds_a, preds_b, labels) -> McNemarResult:
    """
    b counts samples A got right and B got wrong, c the reverse. Exact
    binomial test when b + c < 25, otherwise chi-square with continuity
    correction.
    """
    a = _binary(preds_a, "predictions A")
    bb = _binary(preds_b, "predictions B")
    y = _binary(labels, "labels")
    if not (a.shape == bb.shape == y.shape):
        raise InputError("McNemar inputs must have equal lengths")
    right_a = a == y
    right_b = bb == y
    b = int(np.sum(right_a & ~right_b))
    c = int(np.sum(~right_a & right_b))
    both = int(np.sum(right_a & right_b))
    neither = int(np.sum(~right_a & ~right_b))
    if b + c == 0:
        return McNemarResult(b=b, c=c, p_value=1.0, method="exact", statistic=0.0)
    exact = b + c < EXACT_MCNEMAR_LIMIT
    result = sm_mcnemar([[both, b], [c, neither]], exact=exact, correction=True)
    p = float(min(max(result.pvalue, 0.0), 1.0))
    return McNemarResult(b=b, c=c, p_value=p, method="exact" if exact else "chi2-corrected", statistic=float(result.statistic))


def mcnemar_matrix(predictions: dict[str, np.ndarray], labels) -> list[dict]:
    """McNemar for every unordered model pair, in sorted name order."""
    out = []
    for name_a, name_b in itertools.combinations(sorted(predictions), 2):
        result = mcnemar(predictions[name_a], predictions[name_b], labels)
        out.append({"model_a": name_a, "model_b": name_b, **result.to_dict()})
    return out
