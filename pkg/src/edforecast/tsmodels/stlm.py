"""Decompose-forecast-reseasonalize: seasonal adjustment by LOESS
decomposition, trend/level smoothing on the adjusted series, and the last
estimated weekly cycle replayed onto the forecast."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..series import DailySeries, decompose_stl
from .base import DEFAULT_HORIZONS, TsFit, check_horizon
from .ets import PERIOD, HoltFit, fit_holt


@dataclass(frozen=True)
class StlmFit(TsFit):
    KIND = "stlm"
    model_id = "stlm"

    holt: HoltFit
    pattern: tuple        # weekly offsets indexed by (day index since window start) % 7
    n_obs: int

    def forecast(self, h, allowed=DEFAULT_HORIZONS) -> float:
        check_horizon(h, allowed)
        return float(self.holt.forecast(h, allowed) + self.pattern[(self.n_obs + h - 1) % PERIOD])

    def reforecast(self, values, h, phase=0, allowed=DEFAULT_HORIZONS) -> float:
        check_horizon(h, allowed)
        values = np.asarray(values, dtype=float)
        offsets = np.array([self.pattern[(phase + i) % PERIOD] for i in range(values.size)])
        adjusted = values - offsets
        base = self.holt.reforecast(adjusted, h, allowed=allowed)
        return float(base + self.pattern[(phase + values.size + h - 1) % PERIOD])

    def to_json_dict(self):
        return {"kind": self.KIND, "schema_version": 1,
                "holt": self.holt.to_json_dict(),
                "pattern": list(self.pattern), "n_obs": self.n_obs}

    @classmethod
    def from_json_dict(cls, doc):
        return cls(holt=HoltFit.from_json_dict(doc["holt"]),
                   pattern=tuple(doc["pattern"]), n_obs=int(doc["n_obs"]))


def fit_stlm(series: DailySeries) -> StlmFit:
    """Seasonally adjust via the LOESS decomposition, smooth level and trend
    on the adjusted series, and keep the last full weekly cycle for
    re-seasonalizing forecasts."""
    decomp = decompose_stl(series, PERIOD)
    adjusted = series.with_values(series.values - decomp.seasonal, kind="transformed")
    holt = fit_holt(adjusted)
    n = len(series)
    pattern = [0.0] * PERIOD
    for i in range(n - PERIOD, n):
        pattern[i % PERIOD] = float(decomp.seasonal[i])
    return StlmFit(holt=holt, pattern=tuple(pattern), n_obs=n)
