"""Boosted tree ensembles: residual boosting, second-order regularized
boosting with native missing handling, and exponential-loss AdaBoost.R2.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin

from .._validation import check_fitted, check_matrix, check_n_features, check_X_y
from .tree import fit_boosted_tree, fit_regression_tree

_HESS_FLOOR = 1e-12


class GradientBoostingSpreadRegressor(BaseEstimator, RegressorMixin):
    """Stagewise squared-loss boosting: each tree fits the current residuals.

    base_score is the target mean; every tree enters with weight
    ``learning_rate``.
    """

    def __init__(self, n_trees=100, learning_rate=0.1, max_depth=3, min_leaf=1):
        self.n_trees = n_trees
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_leaf = min_leaf

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        _check_boost_params(self.n_trees, self.learning_rate)
        self.base_score_ = float(np.mean(y))
        self.trees_ = []
        pred = np.full(len(y), self.base_score_)
        for _ in range(self.n_trees):
            residual = y - pred
            tree = fit_regression_tree(
                X, residual, max_depth=self.max_depth, min_leaf=self.min_leaf
            )
            pred += self.learning_rate * tree.predict(X)
            self.trees_.append(tree)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_fitted(self, "trees_")
        X = check_matrix(X)
        check_n_features(X, self.n_features_in_)
        out = np.full(X.shape[0], self.base_score_)
        for tree in self.trees_:
            out += self.learning_rate * tree.predict(X)
        return out


class SecondOrderBoostingRegressor(BaseEstimator, RegressorMixin):
    """Regularized second-order boosting for squared loss.

    Per stage the tree maximizes
    ``0.5*[st(G_L)^2/(H_L+lam) + st(G_R)^2/(H_R+lam) - st(G)^2/(H+lam)] - gamma``
    with g = pred - y and h = 1; leaves carry ``-st(G, alpha)/(H + lam)``.
    With lam = alpha = gamma = 0 this reduces stage-for-stage to
    :class:`GradientBoostingSpreadRegressor`.
    """

    def __init__(
        self,
        n_trees=100,
        learning_rate=0.1,
        max_depth=3,
        min_leaf=1,
        lam=1.0,
        alpha=0.0,
        gamma=0.0,
    ):
        self.n_trees = n_trees
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.lam = lam
        self.alpha = alpha
        self.gamma = gamma

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        _check_boost_params(self.n_trees, self.learning_rate)
        _check_regularizers(self.lam, self.alpha, self.gamma)
        self.base_score_ = float(np.mean(y))
        self.trees_ = []
        pred = np.full(len(y), self.base_score_)
        hess = np.ones(len(y))
        for _ in range(self.n_trees):
            grad = pred - y
            tree = fit_boosted_tree(
                X,
                grad,
                hess,
                max_depth=self.max_depth,
                min_leaf=self.min_leaf,
                lam=self.lam,
                alpha=self.alpha,
                gamma=self.gamma,
            )
            pred += self.learning_rate * tree.predict(X)
            self.trees_.append(tree)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_fitted(self, "trees_")
        X = check_matrix(X)
        check_n_features(X, self.n_features_in_)
        out = np.full(X.shape[0], self.base_score_)
        for tree in self.trees_:
            out += self.learning_rate * tree.predict(X)
        return out


class SecondOrderBoostingClassifier(BaseEstimator, ClassifierMixin):
    """Softmax second-order boosting: one tree per class per stage.

    Gradients come from the diagonal softmax expansion, g_c = p_c - 1{y=c}
    and h_c = p_c (1 - p_c). Class margins start at zero; prediction is the
    argmax margin.
    """

    def __init__(
        self,
        n_trees=50,
        learning_rate=0.1,
        max_depth=3,
        min_leaf=1,
        lam=1.0,
        alpha=0.0,
        gamma=0.0,
    ):
        self.n_trees = n_trees
        self.learning_rate = learning_rate
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.lam = lam
        self.alpha = alpha
        self.gamma = gamma

    def fit(self, X, y, n_classes=None):
        X = check_matrix(X)
        y = np.asarray(y, dtype=np.int64)
        _check_boost_params(self.n_trees, self.learning_rate)
        _check_regularizers(self.lam, self.alpha, self.gamma)
        n = len(y)
        self.n_classes_ = int(n_classes if n_classes is not None else y.max() + 1)
        onehot = np.zeros((n, self.n_classes_))
        onehot[np.arange(n), y] = 1.0
        margins = np.zeros((n, self.n_classes_))
        self.trees_ = []  # list of per-stage lists, one tree per class
        for _ in range(self.n_trees):
            proba = _softmax(margins)
            stage = []
            for c in range(self.n_classes_):
                grad = proba[:, c] - onehot[:, c]
                hess = np.maximum(proba[:, c] * (1.0 - proba[:, c]), _HESS_FLOOR)
                tree = fit_boosted_tree(
                    X,
                    grad,
                    hess,
                    max_depth=self.max_depth,
                    min_leaf=self.min_leaf,
                    lam=self.lam,
                    alpha=self.alpha,
                    gamma=self.gamma,
                )
                margins[:, c] += self.learning_rate * tree.predict(X)
                stage.append(tree)
            self.trees_.append(stage)
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_fitted(self, "trees_")
        X = check_matrix(X)
        check_n_features(X, self.n_features_in_)
        margins = np.zeros((X.shape[0], self.n_classes_))
        for stage in self.trees_:
            for c, tree in enumerate(stage):
                margins[:, c] += self.learning_rate * tree.predict(X)
        return margins

    def predict_proba(self, X):
        return _softmax(self.decision_function(X))

    def predict(self, X):
        if X.shape[0] == 0:
            return np.empty(0, dtype=np.int64)
        return np.argmax(self.decision_function(X), axis=1)


class AdaBoostR2Regressor(BaseEstimator, RegressorMixin):
    """AdaBoost.R2 with exponential loss on normalized absolute errors.

    Per round: fit a weighted tree; relative errors e_i = |err_i|/max|err|;
    losses L_i = 1 - exp(-e_i); with Lbar = sum(w_i L_i) and
    beta = Lbar/(1 - Lbar), weights update as w_i *= beta**(1 - L_i) and the
    round weight is ln(1/beta). Training halts early on a perfect round
    (max error 0) or once Lbar >= 0.5; the final prediction is the
    round-weight-normalized mean.
    """

    def __init__(self, n_rounds=50, base_depth=4, min_leaf=1):
        self.n_rounds = n_rounds
        self.base_depth = base_depth
        self.min_leaf = min_leaf

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.n_rounds < 1:
            raise ValueError("n_rounds must be >= 1")
        n = len(y)
        w = np.full(n, 1.0 / n)
        self.trees_ = []
        self.round_weights_ = []
        for _ in range(self.n_rounds):
            tree = fit_regression_tree(
                X, y, w, max_depth=self.base_depth, min_leaf=self.min_leaf
            )
            err = np.abs(tree.predict(X) - y)
            max_err = err.max()
            if max_err == 0.0:
                self.trees_.append(tree)
                self.round_weights_.append(1.0)
                break
            loss = 1.0 - np.exp(-err / max_err)
            lbar = float(np.sum(w * loss))
            if lbar >= 0.5:
                if not self.trees_:
                    self.trees_.append(tree)
                    self.round_weights_.append(1.0)
                break
            beta = lbar / (1.0 - lbar)
            self.trees_.append(tree)
            self.round_weights_.append(float(np.log(1.0 / beta)))
            w = w * beta ** (1.0 - loss)
            w /= w.sum()
        self.round_weights_ = np.asarray(self.round_weights_)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_fitted(self, "trees_")
        X = check_matrix(X)
        check_n_features(X, self.n_features_in_)
        out = np.zeros(X.shape[0])
        for tree, alpha in zip(self.trees_, self.round_weights_):
            out += alpha * tree.predict(X)
        return out / self.round_weights_.sum()


def _softmax(margins: np.ndarray) -> np.ndarray:
    z = margins - margins.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _check_boost_params(n_trees, learning_rate):
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    if not 0.0 < learning_rate <= 1.0:
        raise ValueError("learning_rate must be in (0, 1]")


def _check_regularizers(lam, alpha, gamma):
    if lam < 0 or alpha < 0 or gamma < 0:
        raise ValueError("lam, alpha, and gamma must be non-negative")
