"""Versioned JSON round-trip for fitted models (audit / cross-tool checks)."""

from __future__ import annotations

import json

import numpy as np

from .boosting import (
    AdaBoostR2Regressor,
    GradientBoostingSpreadRegressor,
    SecondOrderBoostingClassifier,
    SecondOrderBoostingRegressor,
)
from .forest import RandomForestRatingClassifier, RandomForestSpreadRegressor
from .linear import PenalizedLinearRegression
from .tree import Tree

FORMAT_VERSION = 1

_TREE_ESTIMATORS = {
    "rf": RandomForestSpreadRegressor,
    "rf_classifier": RandomForestRatingClassifier,
    "gbdt": GradientBoostingSpreadRegressor,
    "xgb": SecondOrderBoostingRegressor,
    "xgb_classifier": SecondOrderBoostingClassifier,
    "adaboost": AdaBoostR2Regressor,
}


def _tree_to_dict(tree: Tree) -> dict:
    return {
        "children_left": tree.children_left.tolist(),
        "children_right": tree.children_right.tolist(),
        "children_default": tree.children_default.tolist(),
        "feature": tree.feature.tolist(),
        "threshold": [None if np.isnan(t) else t for t in tree.threshold],
        "value": tree.value.tolist(),
        "cover": tree.cover.tolist(),
        "n_samples": tree.n_samples.tolist(),
        "n_features": tree.n_features,
    }


def _tree_from_dict(d: dict) -> Tree:
    return Tree(
        children_left=np.asarray(d["children_left"], dtype=np.int64),
        children_right=np.asarray(d["children_right"], dtype=np.int64),
        children_default=np.asarray(d["children_default"], dtype=np.int64),
        feature=np.asarray(d["feature"], dtype=np.int64),
        threshold=np.asarray(
            [np.nan if t is None else t for t in d["threshold"]], dtype=np.float64
        ),
        value=np.asarray(d["value"], dtype=np.float64),
        cover=np.asarray(d["cover"], dtype=np.float64),
        n_samples=np.asarray(d["n_samples"], dtype=np.int64),
        n_features=int(d["n_features"]),
    )


def model_to_doc(model) -> dict:
    """Serialize a fitted estimator to a plain JSON-compatible document."""
    doc = {"format_version": FORMAT_VERSION, "params": model.get_params()}
    if isinstance(model, PenalizedLinearRegression):
        doc["kind"] = "linear"
        doc["coef"] = model.coef_.tolist()
        doc["intercept"] = model.intercept_
        doc["n_features"] = model.n_features_in_
        return doc
    for kind, cls in _TREE_ESTIMATORS.items():
        if type(model) is cls:
            doc["kind"] = kind
            break
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    if kind == "xgb_classifier":
        doc["trees"] = [[_tree_to_dict(t) for t in stage] for stage in model.trees_]
    else:
        doc["trees"] = [_tree_to_dict(t) for t in model.trees_]
    if hasattr(model, "base_score_"):
        doc["base_score"] = model.base_score_
    if hasattr(model, "round_weights_"):
        doc["round_weights"] = np.asarray(model.round_weights_).tolist()
    if hasattr(model, "n_classes_"):
        doc["n_classes"] = model.n_classes_
    doc["n_features"] = model.n_features_in_
    return doc


def model_from_doc(doc: dict):
    """Rebuild a fitted estimator from :func:`model_to_doc` output."""
    if doc.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported model format {doc.get('format_version')!r}")
    kind = doc["kind"]
    if kind == "linear":
        model = PenalizedLinearRegression(**doc["params"])
        model.coef_ = np.asarray(doc["coef"], dtype=np.float64)
        model.intercept_ = float(doc["intercept"])
        model.n_features_in_ = int(doc["n_features"])
        return model
    cls = _TREE_ESTIMATORS[kind]
    model = cls(**doc["params"])
    if kind == "xgb_classifier":
        model.trees_ = [[_tree_from_dict(t) for t in stage] for stage in doc["trees"]]
    else:
        model.trees_ = [_tree_from_dict(t) for t in doc["trees"]]
    if "base_score" in doc:
        model.base_score_ = float(doc["base_score"])
    if "round_weights" in doc:
        model.round_weights_ = np.asarray(doc["round_weights"], dtype=np.float64)
    if "n_classes" in doc:
        model.n_classes_ = int(doc["n_classes"])
    model.n_features_in_ = int(doc["n_features"])
    return model


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_doc(model), fh)


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return model_from_doc(json.load(fh))
