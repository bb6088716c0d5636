"""Model registry: stable identifiers for every forecaster the backtest
engine can run, with uniform fit entry points per family."""
from __future__ import annotations

from .errors import ContractError
from .mlmodels import fit_gbm, fit_glmnet, fit_knn, fit_lm, fit_rf
from .mlmodels.grids import default_grid
from .tsmodels import fit_arima, fit_ets, fit_stlm, fit_structts
from .tsmodels.arima import DEFAULT_GRID as ARIMA_FULL_GRID
from .tsmodels.arima import SMALL_GRID as ARIMA_SMALL_GRID

TS_MODELS = ("arima", "ets", "stlm", "structts")
ML_MODELS = ("lm", "glmnet", "gbm", "rf", "knn")
REFERENCE_MODELS = ("seasonal_naive",)
ALL_MODELS = TS_MODELS + ML_MODELS + REFERENCE_MODELS


def model_family(model_id: str) -> str:
    if model_id in TS_MODELS:
        return "ts"
    if model_id in ML_MODELS:
        return "ml"
    if model_id in REFERENCE_MODELS:
        return "reference"
    raise ContractError(f"unknown model {model_id!r}")


def fit_ts_model(model_id: str, series, options: dict | None = None):
    options = options or {}
    if model_id == "arima":
        grid = options.get("arima_grid", "small")
        if grid == "small":
            grid = ARIMA_SMALL_GRID
        elif grid == "full":
            grid = ARIMA_FULL_GRID
        return fit_arima(series, grid=grid,
                         refine_mle=bool(options.get("arima_refine_mle", True)))
    if model_id == "ets":
        return fit_ets(series)
    if model_id == "stlm":
        return fit_stlm(series)
    if model_id == "structts":
        return fit_structts(series)
    raise ContractError(f"{model_id!r} is not a time-series model")


def fit_ml_model(model_id: str, matrix, hyperparams: dict, seed: int = 0):
    if model_id == "lm":
        return fit_lm(matrix)
    if model_id == "glmnet":
        return fit_glmnet(matrix, hyperparams)
    if model_id == "gbm":
        return fit_gbm(matrix, hyperparams)
    if model_id == "rf":
        return fit_rf(matrix, hyperparams, seed=seed)
    if model_id == "knn":
        return fit_knn(matrix, hyperparams)
    raise ContractError(f"{model_id!r} is not a covariate model")


def grid_for(model_id: str, matrix=None, overrides: dict | None = None) -> list:
    """Hyperparameter candidates for a model; non-ML models have the single
    empty candidate."""
    if overrides and model_id in overrides:
        return [dict(hp) for hp in overrides[model_id]]
    if model_id in ML_MODELS:
        return default_grid(model_id, matrix)
    if model_id in TS_MODELS or model_id in REFERENCE_MODELS:
        return [{}]
    raise ContractError(f"unknown model {model_id!r}")
