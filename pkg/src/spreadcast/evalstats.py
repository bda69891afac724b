"""Forecast-quality metrics and comparison statistics.

The out-of-sample predictive R2 follows the incremental-skill convention:
1 minus the ratio of the model's squared-error sum to the benchmark's,
pooled over all (bond, month) pairs, so the benchmark scores exactly zero
against itself. Model pairs are compared with the cross-sectionally
modified Diebold-Mariano statistic: squared-error differentials are
averaged over bonds within each month and the resulting monthly series is
t-tested with a Newey-West long-run variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pandas as pd


class EvalError(ValueError):
    pass


class DegenerateSeriesError(EvalError):
    """A test statistic's denominator has no dispersion."""


@dataclass(frozen=True)
class EvalReport:
    mae: float
    rmse: float
    r2: float
    r2_os: float
    n_obs: int
    monthly: pd.DataFrame  # month, n, mae, rmse

    def to_dict(self) -> dict:
        return {
            "mae": self.mae,
            "rmse": self.rmse,
            "r2": self.r2,
            "r2_os": self.r2_os,
            "n_obs": self.n_obs,
        }


@dataclass(frozen=True)
class DMResult:
    """Positive statistic: model B is the more accurate forecaster."""

    statistic: float
    p_value: float
    n_months: int
    nw_lag: int
    significant: bool  # single two-sided test at 5%
    bonferroni_significant: bool  # at 5% across k comparisons
    k_comparisons: int


def evaluate(pred) -> EvalReport:
    """Score a PredictionSet (or an entries frame) against its benchmark."""
    entries = pred.entries if hasattr(pred, "entries") else pred
    if len(entries) == 0:
        raise EvalError("cannot evaluate an empty prediction set")
    actual = entries["actual"].to_numpy(dtype=np.float64)
    predicted = entries["predicted"].to_numpy(dtype=np.float64)
    benchmark = entries["benchmark"].to_numpy(dtype=np.float64)

    err = actual - predicted
    mae = float(np.mean(np.abs(err)))
    rmse = float(np.sqrt(np.mean(err**2)))
    sse = float(np.sum(err**2))
    sst = float(np.sum((actual - actual.mean()) ** 2))
    if sst == 0.0:
        raise EvalError("R2 undefined: actuals have zero variance")
    sse_bench = float(np.sum((actual - benchmark) ** 2))
    if sse_bench == 0.0:
        raise EvalError("R2_OS undefined: benchmark errors are all zero")
    r2 = 1.0 - sse / sst
    r2_os = 1.0 - sse / sse_bench

    monthly = (
        entries.assign(abs_err=np.abs(err), sq_err=err**2)
        .groupby("month")
        .agg(n=("abs_err", "size"), mae=("abs_err", "mean"), sq=("sq_err", "mean"))
        .reset_index()
    )
    monthly["rmse"] = np.sqrt(monthly.pop("sq"))
    return EvalReport(
        mae=mae, rmse=rmse, r2=r2, r2_os=r2_os, n_obs=len(entries), monthly=monthly
    )


def default_nw_lag(n_periods: int) -> int:
    """The common automatic bandwidth floor(4 * (T/100)^(2/9))."""
    return int(math.floor(4.0 * (n_periods / 100.0) ** (2.0 / 9.0)))


def newey_west_variance(series, lag: int) -> float:
    """Bartlett-weighted long-run variance about the sample mean."""
    x = np.asarray(series, dtype=np.float64)
    n = len(x)
    if not 0 <= lag < n:
        raise EvalError(f"need length > lag >= 0, got length {n}, lag {lag}")
    d = x - x.mean()
    var = float(d @ d) / n
    for j in range(1, lag + 1):
        gamma = float(d[j:] @ d[:-j]) / n
        var += 2.0 * (1.0 - j / (lag + 1.0)) * gamma
    return var


def newey_west_t(series, lag: int | None = None) -> float:
    """t-statistic of the series mean with a Newey-West variance."""
    x = np.asarray(series, dtype=np.float64)
    if lag is None:
        lag = default_nw_lag(len(x))
    if np.ptp(x) == 0.0:
        raise DegenerateSeriesError("series has no dispersion")
    var = newey_west_variance(x, lag)
    if var <= 0.0:
        raise DegenerateSeriesError("Newey-West variance is not positive")
    return float(x.mean() / math.sqrt(var / len(x)))


def _normal_two_sided_p(stat: float) -> float:
    return math.erfc(abs(stat) / math.sqrt(2.0))


def monthly_loss_differential(months, errors_a, errors_b) -> pd.Series:
    """d_t = cross-sectional mean of (e_A^2 - e_B^2) per month."""
    frame = pd.DataFrame(
        {
            "month": np.asarray(months),
            "d": np.asarray(errors_a, dtype=np.float64) ** 2
            - np.asarray(errors_b, dtype=np.float64) ** 2,
        }
    )
    return frame.groupby("month")["d"].mean().sort_index()


def dm_test(
    months,
    errors_a,
    errors_b,
    nw_lag: int | None = None,
    k_comparisons: int = 1,
) -> DMResult:
    """Modified Diebold-Mariano test on paired per-(bond, month) errors.

    Positive statistic means model B forecasts more accurately. Requires
    at least 8 overlapping months; identical error magnitudes raise
    :class:`DegenerateSeriesError`.
    """
    d_t = monthly_loss_differential(months, errors_a, errors_b).to_numpy()
    n_months = len(d_t)
    if n_months < 8:
        raise EvalError(f"need >= 8 months of overlap, got {n_months}")
    lag = default_nw_lag(n_months) if nw_lag is None else nw_lag
    if np.ptp(d_t) == 0.0 and d_t[0] == 0.0:
        raise DegenerateSeriesError("loss differentials are identically zero")
    var = newey_west_variance(d_t, lag)
    if var <= 0.0:
        raise DegenerateSeriesError("Newey-West variance is not positive")
    stat = float(d_t.mean() / math.sqrt(var / n_months))
    p = _normal_two_sided_p(stat)
    return DMResult(
        statistic=stat,
        p_value=p,
        n_months=n_months,
        nw_lag=lag,
        significant=p < 0.05,
        bonferroni_significant=p < 0.05 / max(1, k_comparisons),
        k_comparisons=k_comparisons,
    )


def dm_matrix(
    predictions: dict[str, object],
    nw_lag: int | None = None,
    k_comparisons: int | None = None,
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Pairwise DM statistics for named prediction sets.

    Cell (row, col) is the statistic comparing A=row against B=col, so a
    positive value favors the column model. Returns (statistics, flags)
    frames; flags hold "", "*" (5% single test), or "**" (Bonferroni at 5%
    across k comparisons, default k = number of pairs).
    """
    from .harness import align

    names = list(predictions)
    if len(names) < 2:
        raise EvalError("need at least two prediction sets to compare")
    n_pairs = len(names) * (len(names) - 1) // 2
    k = n_pairs if k_comparisons is None else k_comparisons
    stats = pd.DataFrame(np.nan, index=names, columns=names)
    flags = pd.DataFrame("", index=names, columns=names)
    for i, row in enumerate(names):
        for col in names[i + 1 :]:
            joined = align(predictions[row], predictions[col])
            res = dm_test(
                joined["month"],
                joined["actual"] - joined["pred_a"],
                joined["actual"] - joined["pred_b"],
                nw_lag=nw_lag,
                k_comparisons=k,
            )
            stats.loc[row, col] = res.statistic
            stats.loc[col, row] = -res.statistic
            mark = "**" if res.bonferroni_significant else "*" if res.significant else ""
            flags.loc[row, col] = mark
            flags.loc[col, row] = mark
    return stats, flags
