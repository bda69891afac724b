"""Random forests built on the CART trees, regression and classification."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin

from .._validation import check_fitted, check_matrix, check_n_features, check_X_y
from .tree import fit_classification_tree, fit_regression_tree


def _resolve_q(q, n_features: int) -> int:
    """Default feature-subsample size is ceil(m/3)."""
    if q is None:
        return max(1, int(np.ceil(n_features / 3)))
    return int(q)


def _tree_rngs(random_state: int, n_trees: int) -> list[np.random.Generator]:
    seeds = np.random.SeedSequence(random_state).spawn(n_trees)
    return [np.random.default_rng(s) for s in seeds]


def _bootstrap_weights(rng, n: int):
    idx = rng.integers(0, n, size=n)
    counts = np.bincount(idx, minlength=n).astype(np.float64)
    return counts


class RandomForestSpreadRegressor(BaseEstimator, RegressorMixin):
    """Bagged regression trees with per-node feature subsampling.

    Each of ``n_trees`` trees is grown to full depth (unless capped) on a
    seeded bootstrap resample, choosing splits among ``q`` features sampled
    without replacement at every node. The prediction is the unweighted
    mean over trees.
    """

    def __init__(
        self,
        n_trees=100,
        max_depth=None,
        min_leaf=1,
        q=None,
        bootstrap=True,
        random_state=0,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.q = q
        self.bootstrap = bootstrap
        self.random_state = random_state

    def fit(self, X, y, sample_weight=None):
        X, y = check_X_y(X, y)
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        n, m = X.shape
        q = _resolve_q(self.q, m)
        base_w = (
            np.ones(n)
            if sample_weight is None
            else np.asarray(sample_weight, dtype=np.float64)
        )
        self.trees_ = []
        for rng in _tree_rngs(self.random_state, self.n_trees):
            w = base_w.copy()
            if self.bootstrap:
                w *= _bootstrap_weights(rng, n)
            live = w > 0
            tree = fit_regression_tree(
                X[live],
                y[live],
                w[live],
                max_depth=self.max_depth,
                min_leaf=self.min_leaf,
                q=q,
                rng=rng,
            )
            self.trees_.append(tree)
        self.n_features_in_ = m
        return self

    def predict(self, X):
        check_fitted(self, "trees_")
        X = check_matrix(X)
        check_n_features(X, self.n_features_in_)
        if X.shape[0] == 0:
            return np.empty(0)
        out = np.zeros(X.shape[0])
        for tree in self.trees_:
            out += tree.predict(X)
        return out / len(self.trees_)


class RandomForestRatingClassifier(BaseEstimator, ClassifierMixin):
    """Random forest of Gini trees; votes are summed leaf class frequencies."""

    def __init__(
        self,
        n_trees=100,
        max_depth=None,
        min_leaf=1,
        q=None,
        bootstrap=True,
        random_state=0,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.q = q
        self.bootstrap = bootstrap
        self.random_state = random_state

    def fit(self, X, y, n_classes=None):
        X = check_matrix(X)
        y = np.asarray(y, dtype=np.int64)
        if self.n_trees < 1:
            raise ValueError("n_trees must be >= 1")
        n, m = X.shape
        self.n_classes_ = int(n_classes if n_classes is not None else y.max() + 1)
        q = _resolve_q(self.q, m)
        self.trees_ = []
        for rng in _tree_rngs(self.random_state, self.n_trees):
            w = np.ones(n)
            if self.bootstrap:
                w = _bootstrap_weights(rng, n)
            live = w > 0
            tree = fit_classification_tree(
                X[live],
                y[live],
                self.n_classes_,
                w[live],
                max_depth=self.max_depth,
                min_leaf=self.min_leaf,
                q=q,
                rng=rng,
            )
            self.trees_.append(tree)
        self.n_features_in_ = m
        return self

    def predict_proba(self, X):
        check_fitted(self, "trees_")
        X = check_matrix(X)
        check_n_features(X, self.n_features_in_)
        out = np.zeros((X.shape[0], self.n_classes_))
        for tree in self.trees_:
            out += tree.predict(X)
        return out / len(self.trees_)

    def predict(self, X):
        if X.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        return np.argmax(self.predict_proba(X), axis=1)
