"""Seasonal ARIMA with grid selection by AICc.

Coefficients are estimated by conditional sum of squares and (optionally)
refined by exact maximum likelihood through the ARMA state-space form, with
the innovation scale concentrated out of the Kalman likelihood.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.optimize import minimize

from ..errors import ContractError, FitError
from ..series import DailySeries
from .base import DEFAULT_HORIZONS, TsFit, check_horizon
from .kalman import concentrated_loglik

SEASON = 7
ROOT_TOL = 1e-6
CSS_BUDGET = 500
MLE_BUDGET = 300
MAX_STORED_H = 7
_PENALTY = 1e12

DEFAULT_GRID = tuple(
    (p, d, q, P, D, Q)
    for p in (0, 1, 2) for d in (0, 1) for q in (0, 1, 2)
    for P in (0, 1) for D in (0, 1) for Q in (0, 1)
)

# A small curated subset for contexts where fitting the full grid is too slow.
SMALL_GRID = (
    (0, 1, 1, 0, 1, 1), (1, 1, 1, 0, 1, 1), (1, 1, 0, 1, 1, 0),
    (0, 1, 0, 0, 1, 0), (2, 1, 1, 0, 1, 1), (1, 0, 0, 1, 1, 0),
)


def _difference(y, d, D, s=SEASON):
    w = np.asarray(y, dtype=float).copy()
    for _ in range(d):
        w = np.diff(w)
    for _ in range(D):
        w = w[s:] - w[:-s]
    return w


def _expand_ar(short, seasonal, s=SEASON):
    """Coefficients c with (1 - sum a_i B^i)(1 - sum A_j B^{sj}) = 1 - sum c_i B^i."""
    base = np.zeros(1 + len(short))
    base[0] = 1.0
    for i, a in enumerate(short, start=1):
        base[i] = -a
    seas = np.zeros(1 + s * len(seasonal))
    seas[0] = 1.0
    for j, a in enumerate(seasonal, start=1):
        seas[s * j] = -a
    return -np.convolve(base, seas)[1:]


def _expand_ma(short, seasonal, s=SEASON):
    """Coefficients m with (1 + sum b_i B^i)(1 + sum B_j B^{sj}) = 1 + sum m_i B^i."""
    return -_expand_ar([-b for b in short], [-b for b in seasonal], s)


def _roots_outside(coefs) -> bool:
    """True when 1 - sum c_i z^i has all roots outside the unit circle."""
    coefs = np.trim_zeros(np.asarray(coefs, dtype=float), "b")
    if coefs.size == 0:
        return True
    poly = np.concatenate([[1.0], -coefs])
    roots = np.roots(poly[::-1])
    return bool(np.all(np.abs(roots) > 1.0 + ROOT_TOL))


def _admissible(ar_full, ma_full) -> bool:
    # Invertibility of 1 + sum m_i B^i is the root condition on 1 - sum(-m_i) B^i.
    return _roots_outside(ar_full) and _roots_outside(-np.asarray(ma_full))


def _css_residuals(wc, ar, ma):
    """Conditional-sum-of-squares residuals with zero pre-sample values."""
    n = wc.size
    q = len(ma)
    u = wc.copy()
    for i, a in enumerate(ar, start=1):
        u[i:] -= a * wc[:-i]
    if q == 0:
        return u
    e = np.zeros(n)
    for t in range(n):
        acc = u[t]
        for j in range(1, min(q, t) + 1):
            acc -= ma[j - 1] * e[t - j]
        e[t] = acc
    return e


def _arma_loglik(wc, ar, ma):
    """Concentrated exact Gaussian log-likelihood via the Harvey state space."""
    p, q = len(ar), len(ma)
    r = max(p, q + 1)
    T = np.zeros((r, r))
    T[:p, 0] = ar
    T[:-1, 1:] = np.eye(r - 1)
    R = np.zeros(r)
    R[0] = 1.0
    R[1:q + 1] = ma
    RR = np.outer(R, R)
    try:
        P0 = scipy.linalg.solve_discrete_lyapunov(T, RR)
    except Exception:
        return -np.inf, np.nan
    if not np.all(np.isfinite(P0)):
        return -np.inf, np.nan

    a = np.zeros(r)
    P = P0.copy()
    n = wc.size
    v = np.empty(n)
    F = np.empty(n)
    for t in range(n):
        Ft = P[0, 0]
        if not np.isfinite(Ft) or Ft <= 0:
            return -np.inf, np.nan
        v[t] = wc[t] - a[0]
        F[t] = Ft
        K = P[:, 0] / Ft
        a = a + K * v[t]
        P = P - np.outer(K, P[0])
        a = T @ a
        P = T @ P @ T.T + RR
        P = 0.5 * (P + P.T)
    return concentrated_loglik(v, F)


def _forecast_path(values, order, ar_full, ma_full, intercept, h_max):
    """Forecast h_max steps by the ARMA recursion on the differenced series,
    then invert the differencing layers innermost-first."""
    p, d, q, P, D, Q, s = order
    ar = np.asarray(ar_full, dtype=float)
    ma = np.asarray(ma_full, dtype=float)
    w = _difference(values, d, D, s)
    wc = w - intercept
    e = _css_residuals(wc, ar, ma)

    n = wc.size
    wc_ext = np.concatenate([wc, np.zeros(h_max)])
    for i in range(h_max):
        t = n + i
        acc = 0.0
        for j, a in enumerate(ar, start=1):
            if t - j >= 0:
                acc += a * wc_ext[t - j]
        for j, b in enumerate(ma, start=1):
            if 0 <= t - j < n:
                acc += b * e[t - j]
        wc_ext[t] = acc
    fc = wc_ext[n:] + intercept

    # Rebuild each differencing layer: seqs[0] is the original series, the
    # next d entries are ordinary differences, the last D are weekly.
    seqs = [np.asarray(values, dtype=float)]
    for _ in range(d):
        seqs.append(np.diff(seqs[-1]))
    for _ in range(D):
        prev = seqs[-1]
        seqs.append(prev[s:] - prev[:-s])
    for layer in range(len(seqs) - 2, -1, -1):
        seasonal_layer = layer >= d
        ext = list(seqs[layer])
        out = np.empty(h_max)
        for i in range(h_max):
            out[i] = fc[i] + (ext[-s] if seasonal_layer else ext[-1])
            ext.append(out[i])
        fc = out
    return fc


@dataclass(frozen=True)
class ArimaFit(TsFit):
    KIND = "arima"
    model_id = "arima"

    order: tuple              # (p, d, q, P, D, Q, s)
    ar_short: tuple
    ma_short: tuple
    ar_seasonal: tuple
    ma_seasonal: tuple
    intercept: float          # mean of the differenced series (0 when d + D > 0)
    sigma2: float
    aicc: float
    stored_forecasts: tuple   # point forecasts for h = 1..MAX_STORED_H

    @property
    def ar_full(self):
        return tuple(float(v) for v in _expand_ar(self.ar_short, self.ar_seasonal,
                                                  self.order[6]))

    @property
    def ma_full(self):
        return tuple(float(v) for v in _expand_ma(self.ma_short, self.ma_seasonal,
                                                  self.order[6]))

    def forecast(self, h, allowed=DEFAULT_HORIZONS) -> float:
        check_horizon(h, allowed)
        return float(self.stored_forecasts[h - 1])

    def reforecast(self, values, h, phase=0, allowed=DEFAULT_HORIZONS) -> float:
        check_horizon(h, allowed)
        fcs = _forecast_path(np.asarray(values, dtype=float), self.order,
                             self.ar_full, self.ma_full, self.intercept, h)
        return float(fcs[h - 1])

    def to_json_dict(self):
        return {"kind": self.KIND, "schema_version": 1,
                "order": list(self.order),
                "ar_short": list(self.ar_short), "ma_short": list(self.ma_short),
                "ar_seasonal": list(self.ar_seasonal),
                "ma_seasonal": list(self.ma_seasonal),
                "intercept": self.intercept, "sigma2": self.sigma2,
                "aicc": self.aicc,
                "stored_forecasts": list(self.stored_forecasts)}

    @classmethod
    def from_json_dict(cls, doc):
        return cls(order=tuple(doc["order"]),
                   ar_short=tuple(doc["ar_short"]), ma_short=tuple(doc["ma_short"]),
                   ar_seasonal=tuple(doc["ar_seasonal"]),
                   ma_seasonal=tuple(doc["ma_seasonal"]),
                   intercept=float(doc["intercept"]), sigma2=float(doc["sigma2"]),
                   aicc=float(doc["aicc"]),
                   stored_forecasts=tuple(doc["stored_forecasts"]))


def _fit_candidate(values, cand, refine, s=SEASON):
    p, d, q, P, D, Q = cand
    w = _difference(values, d, D, s)
    n = w.size
    k_coef = p + q + P + Q
    if n < max(3 * s, 5 * (k_coef + 2)):
        raise FitError(f"not enough differenced observations for order {cand}")
    has_mean = (d + D == 0)
    mu = float(w.mean()) if has_mean else 0.0
    wc = w - mu
    k_tot = k_coef + (1 if has_mean else 0) + 1  # + innovation variance

    if float(np.var(wc)) < 1e-12:
        # Degenerate window (e.g. constant or exactly periodic input): zero
        # coefficients fit perfectly; rank such candidates by differencing
        # depth first, then by parameter count, so a constant series selects
        # the plain-mean model.
        return {"cand": cand, "ar": (0.0,) * p, "ma": (0.0,) * q,
                "AR": (0.0,) * P, "MA": (0.0,) * Q,
                "mu": mu, "sigma2": 0.0,
                "aicc": -1e15 + 1e3 * (d + D) + float(k_tot)}

    def split(theta):
        return (tuple(theta[:p]), tuple(theta[p:p + q]),
                tuple(theta[p + q:p + q + P]), tuple(theta[p + q + P:]))

    def expanded(theta):
        ar, ma, AR, MA = split(theta)
        return _expand_ar(ar, AR, s), _expand_ma(ma, MA, s)

    def css(theta):
        ar_full, ma_full = expanded(theta)
        if not _admissible(ar_full, ma_full):
            return _PENALTY
        res = _css_residuals(wc, ar_full, ma_full)
        sse = float(res @ res)
        return sse if np.isfinite(sse) else _PENALTY

    theta = np.full(k_coef, 0.05)
    if k_coef:
        sse0 = css(theta)
        res = minimize(css, theta, method="Nelder-Mead",
                       bounds=[(-0.99, 0.99)] * k_coef,
                       options={"maxfev": CSS_BUDGET, "xatol": 1e-3,
                                "fatol": max(1e-10, 1e-6 * sse0)})
        theta = res.x
        if css(theta) >= _PENALTY:
            raise FitError(f"order {cand}: CSS estimates are inadmissible")

        if refine:
            def negll(th):
                ar_full, ma_full = expanded(th)
                if not _admissible(ar_full, ma_full):
                    return _PENALTY
                ll, _ = _arma_loglik(wc, ar_full, ma_full)
                return -ll if np.isfinite(ll) else _PENALTY

            nll0 = negll(theta)
            res2 = minimize(negll, theta, method="Nelder-Mead",
                            bounds=[(-0.99, 0.99)] * k_coef,
                            options={"maxfev": MLE_BUDGET, "xatol": 1e-3,
                                     "fatol": 1e-4})
            if res2.fun < nll0:
                theta = res2.x

    ar_full, ma_full = expanded(theta)
    if not _admissible(ar_full, ma_full):
        raise FitError(f"order {cand}: estimates violate stationarity/invertibility")
    ll, sigma2 = _arma_loglik(wc, ar_full, ma_full)
    if not np.isfinite(ll):
        raise FitError(f"order {cand}: non-finite likelihood")
    denom = n - k_tot - 1
    if denom <= 0:
        raise FitError(f"order {cand}: too many parameters for {n} observations")
    aicc = -2.0 * ll + 2.0 * k_tot * n / denom
    ar, ma, AR, MA = split(tuple(float(v) for v in theta))
    return {"cand": cand, "ar": ar, "ma": ma, "AR": AR, "MA": MA,
            "mu": mu, "sigma2": float(sigma2), "aicc": float(aicc)}


def fit_arima(series: DailySeries, grid=DEFAULT_GRID, refine_mle=True) -> ArimaFit:
    """Fit every order candidate in the grid and keep the AICc minimizer.

    Candidates whose estimation fails are skipped; the fit only fails when
    no candidate succeeds. With refine_mle=False the conditional
    sum-of-squares coefficients are kept as-is (the exact likelihood is
    still evaluated once per candidate for the information criterion).
    """
    values = np.asarray(series.values, dtype=float)
    if values.size < 3 * SEASON:
        raise ContractError(f"ARIMA needs at least {3 * SEASON} observations")
    grid = [tuple(c) for c in grid]
    if not grid:
        raise ContractError("ARIMA order grid is empty")

    results = []
    failures = []
    for cand in grid:
        try:
            results.append(_fit_candidate(values, cand, refine_mle))
        except FitError as e:
            failures.append(str(e))
    if not results:
        raise FitError("all ARIMA candidates failed: " + "; ".join(failures[:3]))
    best = min(results, key=lambda r: (r["aicc"], sum(r["cand"]), r["cand"]))
    p, d, q, P, D, Q = best["cand"]
    order = (p, d, q, P, D, Q, SEASON)
    ar_full = _expand_ar(best["ar"], best["AR"], SEASON)
    ma_full = _expand_ma(best["ma"], best["MA"], SEASON)
    fcs = _forecast_path(values, order, ar_full, ma_full, best["mu"], MAX_STORED_H)
    return ArimaFit(order=order, ar_short=best["ar"], ma_short=best["ma"],
                    ar_seasonal=best["AR"], ma_seasonal=best["MA"],
                    intercept=best["mu"], sigma2=best["sigma2"], aicc=best["aicc"],
                    stored_forecasts=tuple(float(v) for v in fcs))
