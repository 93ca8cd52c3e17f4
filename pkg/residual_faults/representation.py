"""
Geometry of two feature spaces over the same samples: PCA of each space,
Spearman cross-correlation of component scores, canonical correlation
analysis and a joint 2-D projection of the components.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from residual_faults.errors import InputError, SingularCovarianceError
from residual_faults.learners.scaling import apply_scaler, fit_scaler

logger = logging.getLogger(__name__)

EIGEN_TOL = 1e-12
DEFAULT_CCA_COMPONENTS = 20


@dataclass
class ComponentSpace:
    mean: np.ndarray
    loadings: np.ndarray
    explained_variance: np.ndarray
    variance_retained: float
    total_variance: float

    @property
    def k(self) -> int:
        return self.loadings.shape[1]


@dataclass
class SpearmanResult:
    matrix: np.ndarray
    max_abs: float
    mean_of_per_column_max: float
    constant_a: list[int] = field(default_factory=list)
    constant_b: list[int] = field(default_factory=list)


@dataclass
class CCAResult:
    correlations: np.ndarray

    @property
    def mean(self) -> float:
        return float(self.correlations.mean()) if self.correlations.size else 0.0


def _matrix(X, name: str) -> np.ndarray:
    arr = np.asarray(X, dtype=float)
    if arr.ndim != 2:
        raise InputError(f"{name} must be a 2-D matrix")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains NaN or infinite values")
    return arr


def _normalise_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    if vectors.size == 0:
        return vectors
    pivots = vectors[np.argmax(np.abs(vectors), axis=0), np.arange(vectors.shape[1])]
    return vectors * np.where(pivots < 0, -1.0, 1.0)


def pca_fit(X, variance_threshold: float = 0.95) -> ComponentSpace:
    """
    Eigendecomposition of the sample covariance. Components with
    non-positive (numerically zero) eigenvalues are dropped; k is the
    smallest count whose cumulative share reaches ``variance_threshold``.
    """
    arr = _matrix(X, "X")
    if arr.shape[0] < 2:
        raise InputError("PCA needs at least two rows")
    if not 0 < variance_threshold <= 1:
        raise InputError("variance_threshold must be in (0, 1]")
    mean = arr.mean(axis=0)
    cov = np.atleast_2d(np.cov(arr - mean, rowvar=False, ddof=1))
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals, kind="stable")[::-1]
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]
    total = float(np.trace(cov))
    keep = eigvals > max(EIGEN_TOL, EIGEN_TOL * (eigvals[0] if eigvals.size else 0.0))
    eigvals, eigvecs = eigvals[keep], eigvecs[:, keep]
    if eigvals.size == 0:
        return ComponentSpace(mean, np.zeros((arr.shape[1], 0)), np.zeros(0), 1.0, total)
    share = np.cumsum(eigvals) / eigvals.sum()
    k = int(np.searchsorted(share, variance_threshold - 1e-12) + 1)
    k = min(k, eigvals.size)
    loadings = _normalise_signs(eigvecs[:, :k])
    return ComponentSpace(
        mean=mean,
        loadings=loadings,
        explained_variance=eigvals[:k],
        variance_retained=float(share[k - 1]),
        total_variance=total,
    )


def pca_transform(space: ComponentSpace, X) -> np.ndarray:
    arr = _matrix(X, "X")
    return (arr - space.mean) @ space.loadings


def pca_inverse(space: ComponentSpace, scores) -> np.ndarray:
    return np.asarray(scores, dtype=float) @ space.loadings.T + space.mean


def spearman_cross(A, B) -> SpearmanResult:
    """Spearman rho for every (column of A, column of B) pair; constant columns give 0."""
    a = _matrix(A, "A")
    b = _matrix(B, "B")
    if a.shape[0] != b.shape[0]:
        raise InputError(f"row counts differ: {a.shape[0]} vs {b.shape[0]}")

    def ranked(m):
        r = rankdata(m, axis=0) if m.size else m
        r = r - r.mean(axis=0)
        norms = np.sqrt((r * r).sum(axis=0))
        constant = norms <= EIGEN_TOL
        return np.divide(r, norms, out=np.zeros_like(r), where=~constant), constant

    ra, const_a = ranked(a)
    rb, const_b = ranked(b)
    rho = np.clip(ra.T @ rb, -1.0, 1.0)
    rho[const_a, :] = 0.0
    rho[:, const_b] = 0.0
    absolute = np.abs(rho)
    max_abs = float(absolute.max()) if absolute.size else 0.0
    per_column = float(absolute.max(axis=1).mean()) if absolute.size else 0.0
    if const_a.any() or const_b.any():
        logger.warning("Constant columns in Spearman input: %d in A, %d in B", int(const_a.sum()), int(const_b.sum()))
    return SpearmanResult(
        matrix=rho,
        max_abs=max_abs,
        mean_of_per_column_max=per_column,
        constant_a=np.flatnonzero(const_a).tolist(),
        constant_b=np.flatnonzero(const_b).tolist(),
    )


def _inverse_sqrt(cov: np.ndarray, ridge: float, name: str) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(cov)
    if ridge == 0 and eigvals.min() <= EIGEN_TOL * max(1.0, eigvals.max()):
        raise SingularCovarianceError(
            f"within-set covariance of {name} is singular; pass a positive ridge"
        )
    eigvals = np.maximum(eigvals, EIGEN_TOL)
    return (eigvecs / np.sqrt(eigvals)) @ eigvecs.T


def cca(A, B, k: int | None = None, ridge: float = 1e-6) -> CCAResult:
    """
    Canonical correlations from the singular values of the whitened
    cross-covariance, with ``ridge`` added to both within-set covariances.
    """
    a = _matrix(A, "A")
    b = _matrix(B, "B")
    n = a.shape[0]
    if b.shape[0] != n:
        raise InputError(f"row counts differ: {n} vs {b.shape[0]}")
    if ridge < 0:
        raise InputError("ridge must be non-negative")
    limit = min(a.shape[1], b.shape[1])
    k = limit if k is None else int(k)
    if not 1 <= k <= limit:
        raise InputError(f"k must be in [1, {limit}], got {k}")
    if n <= max(a.shape[1], b.shape[1]):
        raise InputError("CCA needs more rows than columns in either space")
    a = a - a.mean(axis=0)
    b = b - b.mean(axis=0)
    caa = a.T @ a / (n - 1) + ridge * np.eye(a.shape[1])
    cbb = b.T @ b / (n - 1) + ridge * np.eye(b.shape[1])
    cab = a.T @ b / (n - 1)
    m = _inverse_sqrt(caa, ridge, "A") @ cab @ _inverse_sqrt(cbb, ridge, "B")
    singular = np.linalg.svd(m, compute_uv=False)
    return CCAResult(correlations=np.clip(singular[:k], 0.0, 1.0))


def _standardise_columns(scores: np.ndarray) -> np.ndarray:
    return apply_scaler(fit_scaler(scores), scores)


def joint_projection(scores_a: np.ndarray, scores_b: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Each component becomes one point: its standardised score column over the
    shared samples. Points of both spaces are projected together to 2-D.
    Returns (points_a, points_b, centroids) with centroids ordered a, b.
    """
    za = _standardise_columns(scores_a).T
    zb = _standardise_columns(scores_b).T
    stacked = np.vstack([za, zb])
    centred = stacked - stacked.mean(axis=0)
    if stacked.shape[0] < 2:
        coords = np.zeros((stacked.shape[0], 2))
    else:
        u, s, _ = np.linalg.svd(centred, full_matrices=False)
        u = _normalise_signs(u[:, :2])
        coords = u * s[:2]
        if coords.shape[1] < 2:
            coords = np.hstack([coords, np.zeros((coords.shape[0], 2 - coords.shape[1]))])
    pa, pb = coords[: za.shape[0]], coords[za.shape[0]:]
    centroids = np.vstack([pa.mean(axis=0), pb.mean(axis=0)])
    return pa, pb, centroids


def orthogonality_report(
    metric_matrix,
    embedding_matrix,
    threshold: float = 0.95,
    cca_components: int = DEFAULT_CCA_COMPONENTS,
    ridge: float = 1e-6,
) -> tuple[dict, list[dict]]:
    """
    Standardise and reduce both spaces, correlate their component scores and
    project the components to 2-D. Returns the summary and the projection rows.
    """
    metrics = _matrix(metric_matrix, "metric matrix")
    embeddings = _matrix(embedding_matrix, "embedding matrix")
    if metrics.shape[0] != embeddings.shape[0]:
        raise InputError("metric and embedding matrices must share their rows")
    space_m = pca_fit(_standardise_columns(metrics), threshold)
    space_e = pca_fit(_standardise_columns(embeddings), threshold)
    if space_m.k == 0 or space_e.k == 0:
        raise InputError("one of the spaces has no variance")
    scores_m = pca_transform(space_m, _standardise_columns(metrics))
    scores_e = pca_transform(space_e, _standardise_columns(embeddings))
    spearman = spearman_cross(scores_m, scores_e)
    n_cca = min(int(cca_components), space_m.k, space_e.k)
    canonical = cca(scores_m, scores_e, k=n_cca, ridge=ridge)
    pa, pb, centroids = joint_projection(scores_m, scores_e)
    summary = {
        "n_samples": int(metrics.shape[0]),
        "k_metrics": space_m.k,
        "k_embeddings": space_e.k,
        "variance_retained_metrics": space_m.variance_retained,
        "variance_retained_embeddings": space_e.variance_retained,
        "spearman_max_abs": spearman.max_abs,
        "spearman_mean_component_max": spearman.mean_of_per_column_max,
        "canonical_correlations": canonical.correlations.tolist(),
        "canonical_mean": canonical.mean,
        "centroid_distance": float(np.linalg.norm(centroids[0] - centroids[1])),
    }
    rows = []
    for group, points in (("metrics", pa), ("embeddings", pb)):
        for i, (x, y) in enumerate(points):
            rows.append({"group": group, "kind": "component", "index": i, "x": float(x), "y": float(y)})
    for group, (x, y) in zip(("metrics", "embeddings"), centroids):
        rows.append({"group": group, "kind": "centroid", "index": -1, "x": float(x), "y": float(y)})
    logger.info(
        "Representation analysis: k=%d/%d, max |rho|=%.3f, mean CCA=%.3f",
        space_m.k, space_e.k, spearman.max_abs, canonical.mean,
    )
    return summary, rows


def load_embeddings(path: str | Path) -> pd.DataFrame:
    """Embeddings CSV: an ``id`` column followed by float columns."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"embeddings file not found: {path}")
    frame = pd.read_csv(path)
    if "id" not in frame.columns or frame.shape[1] < 2:
        raise InputError("embeddings CSV needs an 'id' column and at least one value column")
    values = frame.drop(columns=["id"])
    try:
        values = values.astype(float)
    except ValueError as exc:
        raise InputError(f"non-numeric embedding values in {path}") from exc
    if not np.all(np.isfinite(values.to_numpy())):
        raise InputError(f"embeddings in {path} contain NaN or infinite values")
    frame = pd.concat([frame[["id"]].astype(str), values], axis=1)
    if frame["id"].duplicated().any():
        raise InputError(f"duplicate ids in {path}")
    return frame.set_index("id")
