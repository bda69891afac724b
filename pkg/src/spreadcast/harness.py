"""Walk-forward training engine: rolling and recursive window protocols
with validation-RMSE hyperparameter selection.

For a target month t, the rolling protocol trains on the first
``window - val`` months of [t - window, t - 1] and validates on the last
``val``; the recursive protocol trains on everything from the panel start
through t - 1 - val and validates on [t - val, t - 1]. The grid point with
the lowest validation RMSE (ties: first in grid order) is refit on
training + validation and predicts month t for every bond with a t-1
feature row. The benchmark column is a per-window univariate OLS of the
spread on the designated predictor (agency rating code by default).
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .learners import make_regressor
from .panel import EmptySliceError, Panel, build_slice, month_label

DEFAULT_GRIDS: dict[str, list[dict]] = {
    "rf": [
        {"n_trees": b, "max_depth": d} for b in (100, 300) for d in (8, None)
    ],
    "gbdt": [
        {"n_trees": n, "learning_rate": lr, "max_depth": d}
        for n in (100, 300)
        for lr in (0.05, 0.1)
        for d in (3, 6)
    ],
    "xgb": [
        {"n_trees": n, "learning_rate": lr, "max_depth": d, "lam": 1.0, "alpha": 0.0}
        for n in (100, 300)
        for lr in (0.05, 0.1)
        for d in (3, 6)
    ],
    "adaboost": [{"n_rounds": r, "base_depth": 4} for r in (50, 100)],
    "lasso": [{"lam": l} for l in (1e-4, 1e-3, 1e-2, 1e-1, 1.0)],
    "ridge": [{"lam": l} for l in (1e-4, 1e-3, 1e-2, 1e-1, 1.0)],
    "enet": [
        {"lam": l, "alpha": a}
        for l in (1e-4, 1e-3, 1e-2, 1e-1, 1.0)
        for a in (0.25, 0.5, 0.75)
    ],
}


class HarnessError(ValueError):
    pass


@dataclass(frozen=True)
class WindowPlan:
    """Walk-forward plan. ``window`` is the paper's M in months.

    ``val`` defaults to max(1, window // 3), reproducing the 4/2
    train/validation split at M = 6.
    """

    mode: str  # "rolling" | "recursive"
    window: int
    start_month: int
    end_month: int
    val: int | None = None

    def __post_init__(self):
        if self.mode not in ("rolling", "recursive"):
            raise HarnessError(f"unknown window mode {self.mode!r}")
        if self.window < 2:
            raise HarnessError("window must span at least 2 months")
        v = self.val_months
        if not 1 <= v < self.window:
            raise HarnessError(
                f"validation length {v} must satisfy 1 <= val < window={self.window}"
            )
        if self.start_month + self.window > self.end_month:
            raise HarnessError("no predictable months in [start, end]")

    @property
    def val_months(self) -> int:
        return self.val if self.val is not None else max(1, self.window // 3)

    @property
    def target_months(self) -> range:
        """Months receiving out-of-sample predictions."""
        return range(self.start_month + self.window, self.end_month + 1)

    def split(self, t: int) -> tuple[range, range]:
        """(training months, validation months) for target month t."""
        v = self.val_months
        if self.mode == "rolling":
            lo = t - self.window
            return range(lo, t - v), range(t - v, t)
        return range(self.start_month, t - v), range(t - v, t)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "window": self.window,
            "val": self.val_months,
            "start_month": month_label(self.start_month),
            "end_month": month_label(self.end_month),
        }


@dataclass
class PredictionSet:
    """Out-of-sample predictions: one row per (bond, month) with the
    realized spread, the model prediction, and the benchmark prediction."""

    entries: pd.DataFrame  # bond_id, month, actual, predicted, benchmark
    metadata: dict = field(default_factory=dict)
    shap_monthly: dict | None = None  # month -> (n_rows, n_features) contributions

    def __post_init__(self):
        required = {"bond_id", "month", "actual", "predicted", "benchmark"}
        missing = required - set(self.entries.columns)
        if missing:
            raise HarnessError(f"prediction entries lack columns {sorted(missing)}")
        if self.entries.duplicated(["bond_id", "month"]).any():
            raise HarnessError("duplicate (bond_id, month) prediction keys")

    def __len__(self) -> int:
        return len(self.entries)

    def save(self, csv_path, meta_path=None) -> None:
        out = self.entries.copy()
        out["month"] = out["month"].map(month_label)
        out.to_csv(csv_path, index=False)
        if meta_path is not None:
            with open(meta_path, "w", encoding="utf-8") as fh:
                json.dump(self.metadata, fh, indent=2, default=str)

    @classmethod
    def load(cls, csv_path, meta_path=None) -> "PredictionSet":
        from .panel import month_index

        frame = pd.read_csv(csv_path)
        frame["month"] = frame["month"].map(month_index)
        metadata = {}
        if meta_path is not None:
            with open(meta_path, encoding="utf-8") as fh:
                metadata = json.load(fh)
        return cls(entries=frame, metadata=metadata)


def _slice_or_none(panel, feature_set, months, bench_col):
    try:
        return build_slice(
            panel, feature_set, target_months=months, bench_col=bench_col
        )
    except EmptySliceError:
        return None


def _rmse(y, pred) -> float:
    return float(np.sqrt(np.mean((y - pred) ** 2)))


def _benchmark_fit(bench_col, y):
    """Window OLS of spread on the single predictor; None on degeneracy."""
    ok = np.isfinite(bench_col)
    mean_y = float(np.mean(y))
    x = bench_col[ok]
    yy = y[ok]
    if len(x) < 2 or np.ptp(x) == 0.0:
        return None, mean_y
    xm = x.mean()
    ym = yy.mean()
    slope = float(((x - xm) @ (yy - ym)) / ((x - xm) @ (x - xm)))
    intercept = float(ym - slope * xm)
    return (intercept, slope), mean_y


def _benchmark_predict(fit, mean_y, bench_col):
    out = np.full(len(bench_col), mean_y)
    if fit is not None:
        intercept, slope = fit
        ok = np.isfinite(bench_col)
        out[ok] = intercept + slope * bench_col[ok]
    return out


def _month_seed(seed: int, t: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=(int(seed), int(t)))


def _forecast_month(panel, plan, kind, grid, feature_set, bench_col, seed, t,
                    collect_shap):
    train_months, val_months = plan.split(t)
    train = _slice_or_none(panel, feature_set, train_months, bench_col)
    val = _slice_or_none(panel, feature_set, val_months, bench_col)
    target = _slice_or_none(panel, feature_set, [t], bench_col)
    if train is None or val is None:
        return t, None, "empty training or validation slice"
    if target is None:
        return t, None, "no predictable rows"

    seeds = _month_seed(seed, t).generate_state(len(grid) + 1)
    best_i, best_rmse = 0, np.inf
    for i, params in enumerate(grid):
        model = make_regressor(kind, params, random_state=int(seeds[i]))
        model.fit(train.X, train.y)
        score = _rmse(val.y, model.predict(val.X))
        if score < best_rmse:
            best_i, best_rmse = i, score

    full_months = list(train_months) + list(val_months)
    full = _slice_or_none(panel, feature_set, full_months, bench_col)
    winner = make_regressor(kind, grid[best_i], random_state=int(seeds[-1]))
    winner.fit(full.X, full.y)
    predicted = winner.predict(target.X)

    fit, mean_y = _benchmark_fit(full.bench_col, full.y)
    benchmark = _benchmark_predict(fit, mean_y, target.bench_col)

    shap = None
    if collect_shap:
        from .explain import shap_values

        contribs, _ = shap_values(winner, val.X)
        shap = contribs

    record = {
        "month": t,
        "rows": pd.DataFrame(
            {
                "bond_id": [k[0] for k in target.keys],
                "month": [k[1] for k in target.keys],
                "actual": target.y,
                "predicted": predicted,
                "benchmark": benchmark,
            }
        ),
        "chosen": grid[best_i],
        "val_rmse": best_rmse,
        "benchmark_fallback": fit is None,
        "shap": shap,
    }
    return t, record, None


def run_walk_forward(
    panel: Panel,
    plan: WindowPlan,
    kind: str,
    grid: list[dict] | None = None,
    feature_set: str = "all",
    bench_col: str = "rating_code",
    seed: int = 0,
    threads: int = 1,
    collect_shap: bool = False,
) -> PredictionSet:
    """Walk the plan's target months and assemble a PredictionSet.

    Months with an empty training or validation slice are skipped and
    recorded under metadata["gaps"]. Results are deterministic in
    (panel, plan, kind, grid, feature_set, seed) and independent of
    ``threads``.
    """
    grid = grid if grid is not None else DEFAULT_GRIDS[kind]
    if not grid:
        raise HarnessError("hyperparameter grid is empty")

    months = list(plan.target_months)
    results = {}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(
                    _forecast_month, panel, plan, kind, grid, feature_set,
                    bench_col, seed, t, collect_shap,
                )
                for t in months
            ]
            for fut in futures:
                t, record, gap = fut.result()
                results[t] = (record, gap)
    else:
        for t in months:
            t, record, gap = _forecast_month(
                panel, plan, kind, grid, feature_set, bench_col, seed, t,
                collect_shap,
            )
            results[t] = (record, gap)

    frames, chosen, gaps, fallbacks = [], {}, [], []
    shap_monthly = {} if collect_shap else None
    for t in months:
        record, gap = results[t]
        if record is None:
            gaps.append({"month": month_label(t), "reason": gap})
            continue
        frames.append(record["rows"])
        chosen[month_label(t)] = {
            "params": record["chosen"],
            "val_rmse": record["val_rmse"],
        }
        if record["benchmark_fallback"]:
            fallbacks.append(month_label(t))
        if collect_shap and record["shap"] is not None:
            shap_monthly[t] = record["shap"]

    if not frames:
        raise HarnessError("every target month was skipped")
    entries = pd.concat(frames, ignore_index=True).sort_values(
        ["bond_id", "month"], ignore_index=True
    )
    metadata = {
        "learner": kind,
        "feature_set": feature_set,
        "bench_col": bench_col,
        "plan": plan.to_dict(),
        "seed": seed,
        "grid": grid,
        "chosen": chosen,
        "gaps": gaps,
        "benchmark_fallback_months": fallbacks,
    }
    return PredictionSet(entries=entries, metadata=metadata,
                         shap_monthly=shap_monthly)


def run_benchmark(
    panel: Panel,
    plan: WindowPlan,
    predictor_col: str = "rating_code",
) -> PredictionSet:
    """Per-window univariate OLS of spread on one predictor column.

    Rows with a missing predictor fall back to the window-mean spread, as
    does the whole month when the predictor has no variance in the window.
    """
    frames, gaps, fallbacks = [], [], []
    for t in plan.target_months:
        train_months, val_months = plan.split(t)
        window = list(train_months) + list(val_months)
        full = _slice_or_none(panel, "all", window, predictor_col)
        target = _slice_or_none(panel, "all", [t], predictor_col)
        if full is None or target is None:
            gaps.append({"month": month_label(t), "reason": "empty window or target"})
            continue
        fit, mean_y = _benchmark_fit(full.bench_col, full.y)
        if fit is None:
            fallbacks.append(month_label(t))
        predicted = _benchmark_predict(fit, mean_y, target.bench_col)
        frames.append(
            pd.DataFrame(
                {
                    "bond_id": [k[0] for k in target.keys],
                    "month": [k[1] for k in target.keys],
                    "actual": target.y,
                    "predicted": predicted,
                    "benchmark": predicted,
                }
            )
        )
    if not frames:
        raise HarnessError("every target month was skipped")
    entries = pd.concat(frames, ignore_index=True).sort_values(
        ["bond_id", "month"], ignore_index=True
    )
    metadata = {
        "learner": "benchmark",
        "predictor_col": predictor_col,
        "plan": plan.to_dict(),
        "gaps": gaps,
        "fallback_months": fallbacks,
    }
    return PredictionSet(entries=entries, metadata=metadata)


def align(a: PredictionSet, b: PredictionSet) -> pd.DataFrame:
    """Inner-join two prediction sets on (bond, month).

    Returns columns bond_id, month, actual, pred_a, pred_b; attrs record
    how many rows each side lost. Raises on an empty intersection.
    """
    left = a.entries[["bond_id", "month", "actual", "predicted"]].rename(
        columns={"predicted": "pred_a"}
    )
    right = b.entries[["bond_id", "month", "predicted"]].rename(
        columns={"predicted": "pred_b"}
    )
    joined = left.merge(right, on=["bond_id", "month"], how="inner")
    if joined.empty:
        raise HarnessError("prediction sets share no (bond, month) keys")
    joined.attrs["dropped_a"] = len(a) - len(joined)
    joined.attrs["dropped_b"] = len(b) - len(joined)
    return joined
