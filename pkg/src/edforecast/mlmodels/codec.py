"""Feature encoding shared by the covariate-driven regressors.

Two encodings of the same model-matrix schema:
  * one-hot with first-level drop, for linear models and k-NN;
  * integer level codes, for tree models (split on level subsets).
"""
from __future__ import annotations

import numpy as np
import pandas as pd

from ..errors import ContractError
from ..features import CATEGORICAL_COLUMNS, DOW_LEVELS, MONTH_LEVELS

_LEVELS = {"month": MONTH_LEVELS, "day_of_week": DOW_LEVELS}


def check_schema(feature_columns, frame: pd.DataFrame):
    missing = [c for c in feature_columns if c not in frame.columns]
    extra = [c for c in frame.columns if c not in feature_columns and c != "target"]
    if missing or extra:
        raise ContractError(f"feature schema mismatch: missing={missing} extra={extra}")


class OneHotCodec:
    """One-hot encoding with first-level drop for the fixed categorical vocab."""

    def __init__(self, feature_columns):
        self.feature_columns = list(feature_columns)
        self.encoded_columns = []
        for col in self.feature_columns:
            if col in _LEVELS:
                self.encoded_columns += [f"{col}_{lv}" for lv in _LEVELS[col][1:]]
            else:
                self.encoded_columns.append(col)

    def encode(self, frame: pd.DataFrame) -> np.ndarray:
        check_schema(self.feature_columns, frame)
        cols = []
        for col in self.feature_columns:
            if col in _LEVELS:
                codes = frame[col].to_numpy()
                for lv in _LEVELS[col][1:]:
                    cols.append((codes == lv).astype(float))
            else:
                cols.append(frame[col].to_numpy(dtype=float))
        return np.column_stack(cols)


class TreeCodec:
    """Integer-coded categoricals for CART split search."""

    def __init__(self, feature_columns):
        self.feature_columns = list(feature_columns)
        self.categorical = [c in CATEGORICAL_COLUMNS for c in self.feature_columns]

    def encode(self, frame: pd.DataFrame) -> np.ndarray:
        check_schema(self.feature_columns, frame)
        return np.column_stack([frame[c].to_numpy(dtype=float) for c in self.feature_columns])


def canonical_order(frame: pd.DataFrame) -> pd.DataFrame:
    """Sort rows by target date so fits are invariant to row order."""
    return frame.sort_index(kind="stable")
