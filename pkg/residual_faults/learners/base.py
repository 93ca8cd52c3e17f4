"""Feature matrices, schemas and model (de)serialisation shared by all learners."""

import hashlib
import json
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from residual_faults.errors import InputError, SchemaMismatchError


def schema_hash(columns: Sequence[str]) -> str:
    return hashlib.sha256("\n".join(columns).encode("utf-8")).hexdigest()[:16]


@dataclass
class FeatureMatrix:
    values: np.ndarray
    columns: tuple[str, ...]
    labels: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise InputError(f"feature matrix must be 2-D, got shape {self.values.shape}")
        self.columns = tuple(self.columns)
        if len(self.columns) != self.values.shape[1]:
            raise InputError(
                f"{len(self.columns)} column names for {self.values.shape[1]} feature columns"
            )
        if len(set(self.columns)) != len(self.columns):
            raise InputError("feature column names must be unique")
        if not np.all(np.isfinite(self.values)):
            raise InputError("feature matrix contains NaN or infinite values")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=int)
            if self.labels.shape != (self.values.shape[0],):
                raise InputError("labels length must equal the number of rows")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def schema_hash(self) -> str:
        return schema_hash(self.columns)


def as_array(X, columns: Sequence[str] | None = None) -> np.ndarray:
    """Raw 2-D array from a FeatureMatrix or array-like, checking the schema."""
    if isinstance(X, FeatureMatrix):
        if columns is not None and tuple(X.columns) != tuple(columns):
            raise SchemaMismatchError(
                f"feature columns do not match the trained schema ({schema_hash(X.columns)} != {schema_hash(columns)})"
            )
        return X.values
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if columns is not None and arr.shape[1] != len(columns):
        raise SchemaMismatchError(f"expected {len(columns)} features, got {arr.shape[1]}")
    return arr


def check_training_data(X: np.ndarray, y: np.ndarray | None = None, supervised: bool = True) -> None:
    if X.shape[0] == 0:
        raise InputError("cannot train on an empty matrix")
    if supervised:
        if X.shape[0] < 2:
            raise InputError("need at least two training rows")
        classes = set(np.unique(y).tolist())
        if not classes <= {0, 1}:
            raise InputError(f"labels must be binary 0/1, got {sorted(classes)}")
        if len(classes) < 2:
            raise InputError("training labels contain a single class")


def dump_model(kind: str, columns: Sequence[str], config: dict, seed: int, body: dict) -> str:
    payload = {
        "type": kind,
        "schema_hash": schema_hash(columns),
        "columns": list(columns),
        "config": config,
        "seed": seed,
        "body": body,
    }
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def load_payload(text: str, kind: str | None = None) -> dict[str, Any]:
    payload = json.loads(text)
    if kind is not None and payload.get("type") != kind:
        raise InputError(f"expected a {kind} model, got {payload.get('type')!r}")
    if payload.get("schema_hash") != schema_hash(payload.get("columns", [])):
        raise SchemaMismatchError("model schema hash does not match its column list")
    return payload
