"""Model-matrix construction.

Every feature for target date t uses only information available at the
forecast origin t - h: lagged demand, calendar flags for t (known in
advance), and weather / search-volume observations at t - h.
"""
from __future__ import annotations

from dataclasses import dataclass
from datetime import timedelta

import numpy as np
import pandas as pd

from .errors import ContractError
from .ingest import CovariateTable
from .series import DailySeries

CATEGORICAL_COLUMNS = ("month", "day_of_week")
MONTH_LEVELS = tuple(range(1, 13))
DOW_LEVELS = tuple(range(1, 8))  # Monday=1 .. Sunday=7


@dataclass(frozen=True)
class ModelMatrix:
    """Per-target-date feature records for one forecast horizon."""

    horizon: int
    frame: pd.DataFrame  # indexed by target date; first column is `target`

    def __post_init__(self):
        if "target" not in self.frame.columns:
            raise ContractError("model matrix needs a target column")

    def __len__(self):
        return len(self.frame)

    @property
    def feature_columns(self):
        return [c for c in self.frame.columns if c != "target"]

    @property
    def event_columns(self):
        return [c for c in self.frame.columns if c.startswith("event_")]

    def targets(self) -> np.ndarray:
        return self.frame["target"].to_numpy()

    def features(self) -> pd.DataFrame:
        return self.frame[self.feature_columns]

    def dates(self):
        return list(self.frame.index)

    def window(self, start, end) -> "ModelMatrix":
        """Rows with target date in [start, end]."""
        mask = (self.frame.index >= start) & (self.frame.index <= end)
        return ModelMatrix(self.horizon, self.frame.loc[mask])

    def rows_between(self, i0, i1) -> "ModelMatrix":
        return ModelMatrix(self.horizon, self.frame.iloc[i0:i1])

    def to_csv(self, path):
        out = self.frame.copy()
        out.insert(0, "date", [d.isoformat() for d in out.index])
        float_cols = [c for c in out.columns if out[c].dtype.kind == "f"]
        for c in float_cols:
            out[c] = out[c].map(lambda v: f"{v:.6f}")
        out.to_csv(path, index=False)


def build_matrix(series: DailySeries, cov: CovariateTable, horizon: int) -> ModelMatrix:
    """Build the covariate model matrix for one horizon.

    For h > 1 the "yesterday" lag becomes the most recent observable value
    (t - h); "same day last week" is t - 7 when 7 >= h, else t - 14.
    """
    if horizon < 1:
        raise ContractError("horizon must be >= 1")
    n = len(series)
    if n < 14 + horizon:
        raise ContractError(f"series too short for horizon {horizon}: {n} < {14 + horizon}")
    if cov.start != series.start or len(cov) != n:
        raise ContractError("covariate table is not aligned with the series")

    week_lag = 7 if 7 >= horizon else 14
    first = max(horizon + 6, week_lag)  # earliest target index with all lags observable
    idx = np.arange(first, n)
    origins = idx - horizon
    # Structural leakage check: every lagged index must be observable at the origin.
    if week_lag < horizon or np.any(origins - 6 < 0) or np.any(idx - week_lag > origins):
        raise ContractError("lag construction would leak past the forecast origin")

    values = series.values
    dates = [series.start + timedelta(days=int(i)) for i in idx]
    roll = np.array([values[i - horizon - 6:i - horizon + 1].mean() for i in idx])

    frame = pd.DataFrame(index=pd.Index(dates, name="date"))
    frame["target"] = values[idx]
    frame["month"] = [d.month for d in dates]
    frame["day_of_week"] = [d.isoweekday() for d in dates]
    frame["lag_origin"] = values[origins]
    frame["lag_same_weekday"] = values[idx - week_lag]
    frame["rollmean_prev_week"] = roll
    frame["time_index"] = (idx - (n - 1) / 2.0) / n
    frame["bank_holiday"] = cov.bank_holiday[idx].astype(int)
    frame["school_holiday"] = cov.school_holiday[idx].astype(int)
    frame["precip_prev"] = cov.precipitation[origins]
    frame["tmax_prev"] = cov.temp_max[origins]
    frame["tmin_prev"] = cov.temp_min[origins]
    frame["flu_prev"] = cov.flu[origins]
    for name in cov.event_names():
        frame[f"event_{name}"] = cov.events[name][idx].astype(int)
    return ModelMatrix(horizon, frame)


def ts_feature_view(series: DailySeries) -> DailySeries:
    """Time-series models see only the univariate series; identity by design
    so the backtest engine can treat both model families uniformly."""
    return series
