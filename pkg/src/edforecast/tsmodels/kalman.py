"""Linear-Gaussian Kalman filtering shared by the state-space forecasters."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError


@dataclass
class FilterResult:
    filtered_mean: np.ndarray      # a_{t|t}, shape (n, m)
    filtered_cov: np.ndarray       # P_{t|t}, shape (n, m, m)
    innovations: np.ndarray        # v_t
    innovation_var: np.ndarray     # F_t
    last_pred_mean: np.ndarray     # a_{n+1|n}
    last_pred_cov: np.ndarray


def kalman_filter(y, Z, T, R, Q, H, a0, P0) -> FilterResult:
    """Filter a univariate observation series through the state space

        a_{t+1} = T a_t + R eta_t,  eta ~ N(0, Q)
        y_t     = Z a_t + eps_t,    eps ~ N(0, H)

    with prior a_1 ~ N(a0, P0). Covariances are re-symmetrized every step so
    they stay positive semi-definite.
    """
    y = np.asarray(y, dtype=float)
    Z = np.asarray(Z, dtype=float).reshape(-1)
    T = np.asarray(T, dtype=float)
    m = Z.size
    if T.shape != (m, m):
        raise ContractError("T has the wrong shape")
    R = np.asarray(R, dtype=float)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    RQR = R @ Q @ R.T
    n = y.size

    a = np.asarray(a0, dtype=float).reshape(m).copy()
    P = np.asarray(P0, dtype=float).reshape(m, m).copy()
    fm = np.empty((n, m))
    fc = np.empty((n, m, m))
    v = np.empty(n)
    F = np.empty(n)
    for t in range(n):
        yhat = Z @ a
        PZ = P @ Z
        Ft = float(Z @ PZ + H)
        vt = y[t] - yhat
        v[t] = vt
        F[t] = Ft
        if Ft > 1e-300:
            K = PZ / Ft
            a = a + K * vt
            P = P - np.outer(K, PZ)
        P = 0.5 * (P + P.T)
        fm[t] = a
        fc[t] = P
        a = T @ a
        P = T @ P @ T.T + RQR
        P = 0.5 * (P + P.T)
    return FilterResult(fm, fc, v, F, a, P)


def gaussian_loglik(v, F, skip: int = 0) -> float:
    """Prediction-error log-likelihood, optionally skipping the first
    `skip` (quasi-diffuse) innovations."""
    v = np.asarray(v)[skip:]
    F = np.asarray(F)[skip:]
    if np.any(F <= 0):
        return -np.inf
    return float(-0.5 * np.sum(np.log(2 * np.pi * F) + v * v / F))


def concentrated_loglik(v, F, skip: int = 0):
    """Log-likelihood with the innovation scale concentrated out.

    Returns (loglik, sigma2_hat) where Q and H were specified up to a common
    factor sigma2.
    """
    v = np.asarray(v)[skip:]
    F = np.asarray(F)[skip:]
    n = v.size
    if n == 0 or np.any(F <= 0):
        return -np.inf, np.nan
    s2 = float(np.sum(v * v / F) / n)
    if s2 <= 0:
        return np.inf, 0.0
    ll = -0.5 * (n * np.log(2 * np.pi) + n + n * np.log(s2) + np.sum(np.log(F)))
    return float(ll), s2
