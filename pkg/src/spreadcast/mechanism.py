"""Quintile portfolio analysis of what the spread forecasts pick up.

Each month, bonds are ranked by their predicted spread and split into five
groups (Q1 lowest predicted risk ... Q5 highest, remainder rows going to
the earlier groups). For each mechanism variable (profitability, leverage,
short-term debt share, financing constraints) the table reports the
time-averaged group means, the monthly Q5 - Q1 difference, and its
Newey-West t-statistic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .evalstats import DegenerateSeriesError, newey_west_t
from .panel import MECHANISM_COLUMNS, Panel


class MechanismError(ValueError):
    pass


N_GROUPS = 5


def quintile_sort(bond_ids, predicted) -> np.ndarray:
    """Group label (0..4) per bond, ascending in predicted spread.

    Groups have floor(n/5) rows each with the first n mod 5 groups taking
    one extra; ties in the prediction break by bond_id. Requires at least
    five bonds.
    """
    bond_ids = np.asarray(bond_ids, dtype=object)
    predicted = np.asarray(predicted, dtype=np.float64)
    n = len(bond_ids)
    if n < N_GROUPS:
        raise MechanismError(f"need at least {N_GROUPS} bonds, got {n}")
    order = sorted(range(n), key=lambda i: (predicted[i], bond_ids[i]))
    base, extra = divmod(n, N_GROUPS)
    labels = np.empty(n, dtype=np.int64)
    pos = 0
    for g in range(N_GROUPS):
        size = base + (1 if g < extra else 0)
        for i in order[pos : pos + size]:
            labels[i] = g
        pos += size
    return labels


@dataclass(frozen=True)
class MechanismTable:
    """Time-averaged group means, H-L differences, and Newey-West t-stats."""

    table: pd.DataFrame  # variable x (q1..q5, hl, t_stat, note)
    monthly: pd.DataFrame  # month, variable, group means and hl
    skipped_months: list
    nw_lag: int | None

    def to_frame(self) -> pd.DataFrame:
        return self.table.copy()


def mechanism_table(pred, panel: Panel, nw_lag: int | None = None) -> MechanismTable:
    """Mechanism profile of the quintile portfolios formed on predictions.

    Portfolios form at the end of month t-1 on the spread predicted for
    month t; each mechanism variable is measured in that following month t.
    Needs at least 8 usable months. A variable with no dispersion in its
    H-L series is reported with note "no dispersion" instead of a t-stat.
    """
    entries = pred.entries if hasattr(pred, "entries") else pred
    lookup = panel.row_lookup()
    months = sorted(entries["month"].unique())

    monthly_rows = []
    skipped = []
    for t in months:
        block = entries[entries["month"] == t]
        try:
            labels = quintile_sort(
                block["bond_id"].to_numpy(), block["predicted"].to_numpy()
            )
        except MechanismError as exc:
            skipped.append({"month": int(t), "reason": str(exc)})
            continue
        row_idx = [lookup.get((b, int(t))) for b in block["bond_id"]]
        for var in MECHANISM_COLUMNS:
            values = np.array(
                [
                    panel.mechanism[var][i] if i is not None else np.nan
                    for i in row_idx
                ]
            )
            means = np.full(N_GROUPS, np.nan)
            for g in range(N_GROUPS):
                grp = values[(labels == g) & np.isfinite(values)]
                if len(grp):
                    means[g] = grp.mean()
            rec = {"month": int(t), "variable": var}
            rec.update({f"q{g + 1}": means[g] for g in range(N_GROUPS)})
            rec["hl"] = means[4] - means[0]
            monthly_rows.append(rec)

    monthly = pd.DataFrame(monthly_rows)
    usable = monthly["month"].nunique() if len(monthly) else 0
    if usable < 8:
        raise MechanismError(f"need >= 8 usable months, got {usable}")

    rows = []
    for var in MECHANISM_COLUMNS:
        sub = monthly[monthly["variable"] == var]
        hl_series = sub["hl"].to_numpy()
        hl_series = hl_series[np.isfinite(hl_series)]
        rec = {"variable": var}
        for g in range(N_GROUPS):
            col = sub[f"q{g + 1}"].to_numpy()
            rec[f"q{g + 1}"] = float(np.nanmean(col)) if np.isfinite(col).any() else np.nan
        rec["hl"] = float(np.nanmean(hl_series)) if len(hl_series) else np.nan
        try:
            rec["t_stat"] = newey_west_t(hl_series, nw_lag)
            rec["note"] = ""
        except DegenerateSeriesError:
            rec["t_stat"] = np.nan
            rec["note"] = "no dispersion"
        rows.append(rec)

    table = pd.DataFrame(rows).set_index("variable")
    return MechanismTable(
        table=table, monthly=monthly, skipped_months=skipped, nw_lag=nw_lag
    )
