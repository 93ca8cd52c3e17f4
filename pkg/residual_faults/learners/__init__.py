"""
From-scratch learners: scaler, random forest, gradient-boosted trees,
isolation forest and local outlier factor. All training is deterministic
given the data, the config and the seed.
"""

import json

from residual_faults.errors import InputError
from residual_faults.learners.anomaly import (
    IsolationModel,
    LofModel,
    anomaly_score,
    fit_isolation_forest,
    fit_lof,
    lof_score,
)
from residual_faults.learners.base import FeatureMatrix, schema_hash
from residual_faults.learners.boosting import BoostedModel, train_gbt
from residual_faults.learners.forest import ForestModel, train_random_forest
from residual_faults.learners.scaling import ScalerParams, apply_scaler, fit_scaler

MODEL_TYPES = {cls.KIND: cls for cls in (ForestModel, BoostedModel, IsolationModel, LofModel)}


def load_model(text: str):
    """Rebuild any model from its JSON text."""
    kind = json.loads(text).get("type")
    if kind not in MODEL_TYPES:
        raise InputError(f"unknown model type {kind!r}")
    return MODEL_TYPES[kind].loads(text)


def predict_proba(model, X):
    return model.predict_proba(X)


def predict(model, X, threshold: float = 0.5):
    if isinstance(model, (ForestModel, BoostedModel)):
        return model.predict(X, threshold)
    return model.predict(X)


__all__ = [
    "BoostedModel", "FeatureMatrix", "ForestModel", "IsolationModel", "LofModel",
    "ScalerParams", "anomaly_score", "apply_scaler", "fit_isolation_forest", "fit_lof",
    "fit_scaler", "load_model", "lof_score", "predict", "predict_proba", "schema_hash",
    "train_gbt", "train_random_forest",
]
