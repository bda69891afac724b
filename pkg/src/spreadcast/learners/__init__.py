"""The seven spread-regression learners plus the rating classifiers."""

from .boosting import (
    AdaBoostR2Regressor,
    GradientBoostingSpreadRegressor,
    SecondOrderBoostingClassifier,
    SecondOrderBoostingRegressor,
)
from .forest import RandomForestRatingClassifier, RandomForestSpreadRegressor
from .linear import ConvergenceError, PenalizedLinearRegression, lasso_lambda_max
from .serialize import load_model, model_from_doc, model_to_doc, save_model
from .tree import Tree, fit_boosted_tree, fit_classification_tree, fit_regression_tree, fit_tree

REGRESSOR_KINDS = ("rf", "adaboost", "xgb", "gbdt", "lasso", "ridge", "enet")


def make_regressor(kind: str, params: dict | None = None, random_state: int = 0):
    """Instantiate one of the seven spread learners by kind name."""
    params = dict(params or {})
    if kind == "rf":
        return RandomForestSpreadRegressor(random_state=random_state, **params)
    if kind == "adaboost":
        return AdaBoostR2Regressor(**params)
    if kind == "gbdt":
        return GradientBoostingSpreadRegressor(**params)
    if kind == "xgb":
        return SecondOrderBoostingRegressor(**params)
    if kind in ("lasso", "ridge", "enet"):
        return PenalizedLinearRegression(kind=kind, **params)
    raise ValueError(f"unknown learner kind {kind!r}")


__all__ = [
    "AdaBoostR2Regressor",
    "ConvergenceError",
    "GradientBoostingSpreadRegressor",
    "PenalizedLinearRegression",
    "RandomForestRatingClassifier",
    "RandomForestSpreadRegressor",
    "REGRESSOR_KINDS",
    "SecondOrderBoostingClassifier",
    "SecondOrderBoostingRegressor",
    "Tree",
    "fit_boosted_tree",
    "fit_classification_tree",
    "fit_regression_tree",
    "fit_tree",
    "lasso_lambda_max",
    "load_model",
    "make_regressor",
    "model_from_doc",
    "model_to_doc",
    "save_model",
]
