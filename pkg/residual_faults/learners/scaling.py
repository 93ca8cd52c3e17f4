"""Standardisation to zero mean and unit variance (population std)."""

from dataclasses import dataclass

import numpy as np

from residual_faults.errors import InputError
from residual_faults.learners.base import as_array


@dataclass(frozen=True)
class ScalerParams:
    mean: np.ndarray
    std: np.ndarray

    @property
    def constant(self) -> np.ndarray:
        return self.std == 0

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "ScalerParams":
        return cls(np.asarray(data["mean"], dtype=float), np.asarray(data["std"], dtype=float))


def fit_scaler(X) -> ScalerParams:
    arr = as_array(X)
    if arr.size == 0 or arr.shape[0] == 0:
        raise InputError("cannot fit a scaler on an empty matrix")
    if not np.all(np.isfinite(arr)):
        raise InputError("cannot fit a scaler on non-finite values")
    mean = arr.mean(axis=0)
    std = arr.std(axis=0)
    std = np.where(std < 1e-12 * np.maximum(1.0, np.abs(mean)), 0.0, std)
    return ScalerParams(mean=mean, std=std)


def apply_scaler(params: ScalerParams, X) -> np.ndarray:
    arr = as_array(X)
    if arr.shape[1] != params.mean.shape[0]:
        raise InputError(f"scaler fitted on {params.mean.shape[0]} columns, got {arr.shape[1]}")
    safe = np.where(params.std > 0, params.std, 1.0)
    out = (arr - params.mean) / safe
    out[:, params.std == 0] = 0.0
    return out
