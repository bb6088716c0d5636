"""Univariate time-series forecasters with a uniform fit/forecast contract."""
from .arima import ArimaFit, fit_arima
from .base import DEFAULT_HORIZONS, TsFit, check_horizon, ts_fit_from_json_dict
from .ets import EtsFit, HoltFit, fit_ets, fit_holt
from .kalman import FilterResult, concentrated_loglik, gaussian_loglik, kalman_filter
from .stlm import StlmFit, fit_stlm
from .structts import StructFit, fit_structts

__all__ = [
    "ArimaFit", "fit_arima",
    "DEFAULT_HORIZONS", "TsFit", "check_horizon", "ts_fit_from_json_dict",
    "EtsFit", "HoltFit", "fit_ets", "fit_holt",
    "FilterResult", "concentrated_loglik", "gaussian_loglik", "kalman_filter",
    "StlmFit", "fit_stlm",
    "StructFit", "fit_structts",
]
