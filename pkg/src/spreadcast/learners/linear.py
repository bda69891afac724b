"""Penalized linear regression: ridge by normal equations, lasso and
elastic net by cyclic coordinate descent with soft-thresholding.

Ridge penalizes the raw residual sum of squares plus ``lam * ||beta||^2``
(normal equations with lam on the identity, intercept unpenalized). Lasso
and elastic net minimize ``(1/2n)·RSS + lam·[alpha·||beta||_1 +
(1-alpha)/2·||beta||_2^2]``, so lasso zeroes every coefficient once
``lam >= max_j |<x_j, y - ybar>| / n``. Missing inputs are imputed as zero,
which is the column mean on standardized features.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .._validation import check_fitted, check_matrix, check_n_features, check_X_y

KINDS = ("ols", "ridge", "lasso", "enet")


class ConvergenceError(RuntimeError):
    """Coordinate descent ran out of sweeps; carries the last iterate."""

    def __init__(self, message, coefficients):
        super().__init__(message)
        self.coefficients = coefficients


def soft_threshold(x: float, t: float) -> float:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


class PenalizedLinearRegression(BaseEstimator, RegressorMixin):
    def __init__(
        self,
        kind="ols",
        lam=0.0,
        alpha=1.0,
        fit_intercept=True,
        max_sweeps=10_000,
        tol=1e-7,
    ):
        self.kind = kind
        self.lam = lam
        self.alpha = alpha
        self.fit_intercept = fit_intercept
        self.max_sweeps = max_sweeps
        self.tol = tol

    def fit(self, X, y):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        X, y = check_X_y(X, y)
        X = np.nan_to_num(X, nan=0.0)
        if self.fit_intercept:
            x_mean = X.mean(axis=0)
            y_mean = float(y.mean())
        else:
            x_mean = np.zeros(X.shape[1])
            y_mean = 0.0
        Xc = X - x_mean
        yc = y - y_mean

        if self.kind == "ols":
            beta = np.linalg.lstsq(Xc, yc, rcond=None)[0]
        elif self.kind == "ridge":
            m = Xc.shape[1]
            beta = np.linalg.solve(
                Xc.T @ Xc + self.lam * np.eye(m), Xc.T @ yc
            )
        else:
            alpha = 1.0 if self.kind == "lasso" else self.alpha
            beta = self._coordinate_descent(Xc, yc, self.lam, alpha)

        self.coef_ = beta
        self.intercept_ = y_mean - float(x_mean @ beta)
        self.n_features_in_ = X.shape[1]
        return self

    def _coordinate_descent(self, X, y, lam, alpha):
        n, m = X.shape
        beta = np.zeros(m)
        z = (X * X).sum(axis=0) / n  # (1/n)<x_j, x_j>
        resid = y.copy()
        l1 = lam * alpha
        l2 = lam * (1.0 - alpha)
        last_obj = np.inf
        for _ in range(self.max_sweeps):
            max_delta = 0.0
            for j in range(m):
                if z[j] == 0.0:
                    continue
                old = beta[j]
                rho = (X[:, j] @ resid) / n + z[j] * old
                new = soft_threshold(rho, l1) / (z[j] + l2)
                if new != old:
                    resid += X[:, j] * (old - new)
                    beta[j] = new
                    max_delta = max(max_delta, abs(new - old))
            if __debug__:
                obj = self._objective(resid, beta, lam, alpha)
                assert obj <= last_obj + 1e-10, "coordinate descent went uphill"
                last_obj = obj
            if max_delta < self.tol:
                return beta
        raise ConvergenceError(
            f"coordinate descent did not converge in {self.max_sweeps} sweeps "
            f"(last max coefficient change {max_delta:.3e})",
            coefficients=beta,
        )

    @staticmethod
    def _objective(resid, beta, lam, alpha):
        n = len(resid)
        return float(
            (resid @ resid) / (2 * n)
            + lam * (alpha * np.abs(beta).sum() + (1 - alpha) / 2 * (beta @ beta))
        )

    def predict(self, X):
        check_fitted(self, "coef_")
        X = check_matrix(X)
        check_n_features(X, self.n_features_in_)
        X = np.nan_to_num(X, nan=0.0)
        return self.intercept_ + X @ self.coef_


def lasso_lambda_max(X, y) -> float:
    """Smallest lam at which lasso returns the all-zero coefficient vector."""
    X = np.nan_to_num(np.asarray(X, dtype=np.float64), nan=0.0)
    y = np.asarray(y, dtype=np.float64)
    Xc = X - X.mean(axis=0)
    yc = y - y.mean()
    return float(np.max(np.abs(Xc.T @ yc)) / len(y))
