"""Additive exponential smoothing: Holt-Winters with weekly seasonality, and
the non-seasonal Holt variant used after seasonal adjustment."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ..errors import ContractError, FitError
from ..series import DailySeries
from .base import DEFAULT_HORIZONS, TsFit, check_horizon

PERIOD = 7
OPT_BUDGET = 500
_START = (0.2, 0.05, 0.1)


def _cycle_mean_line(values, cycles):
    """OLS line through the first `cycles` weekly means, placed at the cycle
    centers. Exact for constant, linear, and purely periodic inputs."""
    means = values[:cycles * PERIOD].reshape(cycles, PERIOD).mean(axis=1)
    centers = (PERIOD - 1) / 2.0 + PERIOD * np.arange(cycles, dtype=float)
    if cycles == 1:
        return float(means[0]), 0.0
    slope, intercept = np.polyfit(centers, means, 1)
    return float(intercept), float(slope)


def _linear_init(values):
    """Level/trend from a line through the first two weeks; the level is the
    line's value just before the first observation."""
    intercept, slope = _cycle_mean_line(values, min(2, len(values) // PERIOD))
    return float(intercept - slope), float(slope)


def _seasonal_init(values):
    """Averaged detrended offsets over the first four cycles, centered."""
    cycles = min(4, len(values) // PERIOD)
    head = values[:cycles * PERIOD]
    intercept, slope = _cycle_mean_line(values, cycles)
    t = np.arange(head.size, dtype=float)
    detrended = head - (intercept + slope * t)
    seasonal = detrended.reshape(cycles, PERIOD).mean(axis=0)
    return seasonal - seasonal.mean()


def _hw_filter(values, alpha, beta, gamma, level0, trend0, seasonal0):
    """Holt-Winters recursions; seasonal states are renormalized to zero sum
    every step (the drift moves into the level). Returns (sse, state)."""
    level, trend = level0, trend0
    seas = list(seasonal0)
    sse = 0.0
    for t in range(len(values)):
        s = seas[t % PERIOD]
        yhat = level + trend + s
        y = values[t]
        e = y - yhat
        sse += e * e
        prev_level = level
        level = alpha * (y - s) + (1.0 - alpha) * (level + trend)
        trend = beta * (level - prev_level) + (1.0 - beta) * trend
        seas[t % PERIOD] = gamma * (y - level) + (1.0 - gamma) * s
        m = sum(seas) / PERIOD
        if m != 0.0:
            seas = [v - m for v in seas]
            level += m
    return sse, (level, trend, tuple(seas))


def _holt_filter(values, alpha, beta, level0, trend0):
    level, trend = level0, trend0
    sse = 0.0
    for y in values:
        e = y - (level + trend)
        sse += e * e
        prev_level = level
        level = alpha * y + (1.0 - alpha) * (level + trend)
        trend = beta * (level - prev_level) + (1.0 - beta) * trend
    return sse, (level, trend)


@dataclass(frozen=True)
class EtsFit(TsFit):
    KIND = "ets"
    model_id = "ets"

    alpha: float
    beta: float
    gamma: float
    level: float
    trend: float
    seasonals: tuple         # state at the end of the training window
    n_obs: int               # length of the training window
    sse: float

    def forecast(self, h, allowed=DEFAULT_HORIZONS) -> float:
        check_horizon(h, allowed)
        s = self.seasonals[(self.n_obs + h - 1) % PERIOD]
        return float(self.level + h * self.trend + s)

    def reforecast(self, values, h, phase=0, allowed=DEFAULT_HORIZONS) -> float:
        check_horizon(h, allowed)
        values = np.asarray(values, dtype=float)
        level0, trend0 = _linear_init(values)
        seasonal0 = _seasonal_init(values)
        _, (level, trend, seas) = _hw_filter(values, self.alpha, self.beta, self.gamma,
                                             level0, trend0, seasonal0)
        return float(level + h * trend + seas[(len(values) + h - 1) % PERIOD])

    def to_json_dict(self):
        return {"kind": self.KIND, "schema_version": 1,
                "alpha": self.alpha, "beta": self.beta, "gamma": self.gamma,
                "level": self.level, "trend": self.trend,
                "seasonals": list(self.seasonals), "n_obs": self.n_obs, "sse": self.sse}

    @classmethod
    def from_json_dict(cls, doc):
        return cls(alpha=doc["alpha"], beta=doc["beta"], gamma=doc["gamma"],
                   level=doc["level"], trend=doc["trend"],
                   seasonals=tuple(doc["seasonals"]), n_obs=int(doc["n_obs"]),
                   sse=float(doc["sse"]))


@dataclass(frozen=True)
class HoltFit(TsFit):
    KIND = "holt"
    model_id = "holt"

    alpha: float
    beta: float
    level: float
    trend: float
    n_obs: int
    sse: float

    def forecast(self, h, allowed=DEFAULT_HORIZONS) -> float:
        check_horizon(h, allowed)
        return float(self.level + h * self.trend)

    def reforecast(self, values, h, phase=0, allowed=DEFAULT_HORIZONS) -> float:
        check_horizon(h, allowed)
        values = np.asarray(values, dtype=float)
        level0, trend0 = _linear_init(values)
        _, (level, trend) = _holt_filter(values, self.alpha, self.beta, level0, trend0)
        return float(level + h * trend)

    def to_json_dict(self):
        return {"kind": self.KIND, "schema_version": 1,
                "alpha": self.alpha, "beta": self.beta,
                "level": self.level, "trend": self.trend,
                "n_obs": self.n_obs, "sse": self.sse}

    @classmethod
    def from_json_dict(cls, doc):
        return cls(alpha=doc["alpha"], beta=doc["beta"], level=doc["level"],
                   trend=doc["trend"], n_obs=int(doc["n_obs"]), sse=float(doc["sse"]))


def fit_ets(series: DailySeries) -> EtsFit:
    """Additive error/trend/seasonal smoothing; weights chosen by minimizing
    one-step in-sample SSE with a bounded simplex search."""
    values = np.asarray(series.values, dtype=float)
    if values.size < 3 * PERIOD:
        raise ContractError(f"ETS needs at least {3 * PERIOD} observations")
    level0, trend0 = _linear_init(values)
    seasonal0 = _seasonal_init(values)

    def objective(params):
        a, b, g = params
        sse, _ = _hw_filter(values, a, b, g, level0, trend0, seasonal0)
        return sse

    sse0 = objective(_START)
    res = minimize(objective, _START, method="Nelder-Mead",
                   bounds=[(0.0, 1.0)] * 3,
                   options={"maxfev": OPT_BUDGET, "xatol": 1e-4,
                            "fatol": max(1e-12, 1e-7 * sse0)})
    alpha, beta, gamma = (float(v) for v in res.x)
    sse, (level, trend, seas) = _hw_filter(values, alpha, beta, gamma,
                                           level0, trend0, seasonal0)
    fit = EtsFit(alpha=alpha, beta=beta, gamma=gamma, level=level, trend=trend,
                 seasonals=seas, n_obs=values.size, sse=float(sse))
    if not res.success:
        raise FitError(f"ETS optimizer did not converge: {res.message}", partial=fit)
    return fit


def fit_holt(series: DailySeries) -> HoltFit:
    """Non-seasonal (level + trend) exponential smoothing."""
    values = np.asarray(series.values, dtype=float)
    if values.size < 2 * PERIOD:
        raise ContractError(f"Holt needs at least {2 * PERIOD} observations")
    level0, trend0 = _linear_init(values)

    def objective(params):
        a, b = params
        sse, _ = _holt_filter(values, a, b, level0, trend0)
        return sse

    sse0 = objective(_START[:2])
    res = minimize(objective, _START[:2], method="Nelder-Mead",
                   bounds=[(0.0, 1.0)] * 2,
                   options={"maxfev": OPT_BUDGET, "xatol": 1e-4,
                            "fatol": max(1e-12, 1e-7 * sse0)})
    alpha, beta = (float(v) for v in res.x)
    sse, (level, trend) = _holt_filter(values, alpha, beta, level0, trend0)
    fit = HoltFit(alpha=alpha, beta=beta, level=level, trend=trend,
                  n_obs=values.size, sse=float(sse))
    if not res.success:
        raise FitError(f"Holt optimizer did not converge: {res.message}", partial=fit)
    return fit
