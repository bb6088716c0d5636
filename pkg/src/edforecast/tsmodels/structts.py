"""Basic structural model: local linear trend plus a weekly dummy seasonal,
with the four disturbance variances estimated by maximum likelihood through
the Kalman filter."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ..errors import ContractError, FitError
from ..series import DailySeries
from .base import DEFAULT_HORIZONS, TsFit, check_horizon
from .kalman import gaussian_loglik, kalman_filter

PERIOD = 7
STATE_DIM = 2 + (PERIOD - 1)   # level, slope, 6 seasonal states
OPT_BUDGET = 500
DIFFUSE_SCALE = 1e7
SKIP = STATE_DIM               # quasi-diffuse burn-in dropped from the likelihood
_START_LOG = (-2.0, -6.0, -4.0, 0.0)  # level, slope, seasonal, observation


def _system():
    Z = np.zeros(STATE_DIM)
    Z[0] = 1.0
    Z[2] = 1.0
    T = np.zeros((STATE_DIM, STATE_DIM))
    T[0, 0] = T[0, 1] = T[1, 1] = 1.0
    T[2, 2:] = -1.0
    for i in range(3, STATE_DIM):
        T[i, i - 1] = 1.0
    R = np.zeros((STATE_DIM, 3))
    R[0, 0] = 1.0   # level disturbance
    R[1, 1] = 1.0   # slope disturbance
    R[2, 2] = 1.0   # seasonal disturbance
    return Z, T, R


def _filter(values, variances):
    var_level, var_slope, var_seas, var_obs = variances
    Z, T, R = _system()
    scale = max(float(np.var(values)), 1e-8)
    a0 = np.zeros(STATE_DIM)
    a0[0] = float(values[0])
    P0 = DIFFUSE_SCALE * scale * np.eye(STATE_DIM)
    Q = np.diag([var_level, var_slope, var_seas])
    return kalman_filter(values, Z, T, R, Q, var_obs, a0, P0)


@dataclass(frozen=True)
class StructFit(TsFit):
    KIND = "structts"
    model_id = "structts"

    var_level: float
    var_slope: float
    var_seasonal: float
    var_obs: float
    state: tuple              # one-step predicted state after the window end
    state_cov: tuple          # its covariance, row-major tuple of tuples
    loglik: float
    n_obs: int

    def __post_init__(self):
        if min(self.variances) < 0:
            raise ContractError("structural model variances must be non-negative")
        cov = np.asarray(self.state_cov, dtype=float)
        if cov.shape != (STATE_DIM, STATE_DIM):
            raise ContractError("state covariance has the wrong shape")
        tol = 1e-8 * max(1.0, float(np.max(np.abs(cov))))
        if float(np.min(np.linalg.eigvalsh(0.5 * (cov + cov.T)))) < -tol:
            raise ContractError("state covariance is not positive semi-definite")

    @property
    def variances(self):
        return (self.var_level, self.var_slope, self.var_seasonal, self.var_obs)

    def forecast(self, h, allowed=DEFAULT_HORIZONS) -> float:
        check_horizon(h, allowed)
        Z, T, _ = _system()
        a = np.asarray(self.state, dtype=float)
        for _ in range(h - 1):
            a = T @ a
        return float(Z @ a)

    def reforecast(self, values, h, phase=0, allowed=DEFAULT_HORIZONS) -> float:
        check_horizon(h, allowed)
        values = np.asarray(values, dtype=float)
        res = _filter(values, self.variances)
        Z, T, _ = _system()
        a = res.last_pred_mean
        for _ in range(h - 1):
            a = T @ a
        return float(Z @ a)

    def to_json_dict(self):
        return {"kind": self.KIND, "schema_version": 1,
                "var_level": self.var_level, "var_slope": self.var_slope,
                "var_seasonal": self.var_seasonal, "var_obs": self.var_obs,
                "state": list(self.state),
                "state_cov": [list(row) for row in self.state_cov],
                "loglik": self.loglik, "n_obs": self.n_obs}

    @classmethod
    def from_json_dict(cls, doc):
        return cls(var_level=float(doc["var_level"]),
                   var_slope=float(doc["var_slope"]),
                   var_seasonal=float(doc["var_seasonal"]),
                   var_obs=float(doc["var_obs"]),
                   state=tuple(doc["state"]),
                   state_cov=tuple(tuple(row) for row in doc["state_cov"]),
                   loglik=float(doc["loglik"]), n_obs=int(doc["n_obs"]))


def fit_structts(series: DailySeries) -> StructFit:
    """Maximize the prediction-error likelihood over the four log-variances,
    parameterized relative to the sample variance of the window."""
    values = np.asarray(series.values, dtype=float)
    if values.size < 3 * PERIOD:
        raise ContractError(f"structural model needs at least {3 * PERIOD} observations")
    scale = max(float(np.var(values)), 1e-8)

    def variances(params):
        return tuple(scale * np.exp(p) for p in params)

    def objective(params):
        res = _filter(values, variances(params))
        ll = gaussian_loglik(res.innovations, res.innovation_var, skip=SKIP)
        return -ll if np.isfinite(ll) else 1e12

    res = minimize(objective, _START_LOG, method="Nelder-Mead",
                   bounds=[(-30.0, 8.0)] * 4,
                   options={"maxfev": OPT_BUDGET, "xatol": 1e-3, "fatol": 1e-4})
    var_level, var_slope, var_seas, var_obs = variances(res.x)
    filt = _filter(values, (var_level, var_slope, var_seas, var_obs))
    ll = gaussian_loglik(filt.innovations, filt.innovation_var, skip=SKIP)
    # Near-degenerate variances leave the covariance as roundoff noise
    # around zero; project it back onto the PSD cone.
    cov = 0.5 * (filt.last_pred_cov + filt.last_pred_cov.T)
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals[0] < 0:
        cov = (eigvecs * np.clip(eigvals, 0.0, None)) @ eigvecs.T
        cov = 0.5 * (cov + cov.T)
    filt.last_pred_cov = cov
    fit = StructFit(var_level=var_level, var_slope=var_slope,
                    var_seasonal=var_seas, var_obs=var_obs,
                    state=tuple(float(v) for v in filt.last_pred_mean),
                    state_cov=tuple(tuple(float(v) for v in row)
                                    for row in filt.last_pred_cov),
                    loglik=float(ll), n_obs=values.size)
    if not np.isfinite(ll):
        raise FitError("structural model likelihood is not finite", partial=fit)
    return fit
