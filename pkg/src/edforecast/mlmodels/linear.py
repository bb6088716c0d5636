"""Ordinary least squares and elastic-net linear models."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
import scipy.linalg

from ..errors import ContractError, ConvergenceError
from ..features import ModelMatrix
from .base import FittedModel, check_hyperparams
from .codec import OneHotCodec, canonical_order

CD_TOL = 1e-7
CD_MAX_SWEEPS = 10_000


@dataclass(frozen=True)
class LinearFit(FittedModel):
    KINDS = ("lm", "glmnet")

    model_id: str
    feature_columns: tuple
    encoded_columns: tuple
    coefficients: np.ndarray       # original (unstandardized) encoded scale
    intercept: float
    standardization: tuple         # (means, sds) over encoded columns
    dropped: tuple                 # encoded columns removed (zero variance / dependent)
    hyperparams: dict

    def predict_frame(self, frame: pd.DataFrame) -> np.ndarray:
        codec = OneHotCodec(self.feature_columns)
        X = codec.encode(frame)
        return X @ self.coefficients + self.intercept

    def coefficient(self, encoded_name: str) -> float:
        return float(self.coefficients[self.encoded_columns.index(encoded_name)])

    def to_json_dict(self) -> dict:
        means, sds = self.standardization
        return {
            "kind": self.model_id,
            "schema_version": 1,
            "feature_columns": list(self.feature_columns),
            "encoded_columns": list(self.encoded_columns),
            "coefficients": [repr(float(c)) for c in self.coefficients],
            "intercept": repr(float(self.intercept)),
            "means": [repr(float(v)) for v in means],
            "sds": [repr(float(v)) for v in sds],
            "dropped": list(self.dropped),
            "hyperparams": self.hyperparams,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "LinearFit":
        return cls(
            model_id=doc["kind"],
            feature_columns=tuple(doc["feature_columns"]),
            encoded_columns=tuple(doc["encoded_columns"]),
            coefficients=np.array([float(c) for c in doc["coefficients"]]),
            intercept=float(doc["intercept"]),
            standardization=(np.array([float(v) for v in doc["means"]]),
                             np.array([float(v) for v in doc["sds"]])),
            dropped=tuple(doc["dropped"]),
            hyperparams=dict(doc["hyperparams"]),
        )


def _design(matrix: ModelMatrix):
    frame = canonical_order(matrix.frame)
    features = frame[[c for c in frame.columns if c != "target"]]
    codec = OneHotCodec(list(features.columns))
    X = codec.encode(features)
    y = frame["target"].to_numpy(dtype=float)
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ContractError("design matrix contains non-finite values")
    return codec, X, y


def fit_lm(matrix: ModelMatrix) -> LinearFit:
    """OLS via pivoted QR; dependent/constant columns are dropped and recorded."""
    codec, X, y = _design(matrix)
    n, p = X.shape
    names = codec.encoded_columns
    means = X.mean(axis=0)
    sds = X.std(axis=0)

    keep = np.flatnonzero(sds > 0)
    design = np.column_stack([np.ones(n), X[:, keep]])
    q, r, piv = scipy.linalg.qr(design, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(n, design.shape[1]) * np.finfo(float).eps * (diag[0] if diag.size else 1.0)
    rank = int(np.sum(diag > tol))
    used = piv[:rank]
    beta_used, *_ = np.linalg.lstsq(design[:, used], y, rcond=None)

    beta_full = np.zeros(design.shape[1])
    beta_full[used] = beta_used
    coefs = np.zeros(p)
    coefs[keep] = beta_full[1:]
    intercept = float(beta_full[0])
    if 0 not in used:
        # intercept column was pivoted out (only possible in degenerate designs)
        intercept = float(np.mean(y - X @ coefs))
    dropped = [names[j] for j in range(p) if sds[j] == 0.0]
    dropped += [names[keep[j - 1]] for j in range(1, design.shape[1]) if j not in used]
    return LinearFit("lm", tuple(codec.feature_columns), tuple(names),
                     coefs, intercept, (means, sds), tuple(sorted(set(dropped))), {})


def soft_threshold(z: float, t: float) -> float:
    return float(np.sign(z) * max(abs(z) - t, 0.0))


def fit_glmnet(matrix: ModelMatrix, hp: dict) -> LinearFit:
    """Elastic net by cyclic coordinate descent with soft-thresholding.

    Minimizes (1/2n)*SSE + lambda*(alpha*l1 + (1-alpha)/2*l2^2) on internally
    standardized features; coefficients are reported on the original scale.
    """
    hp = check_hyperparams("glmnet", hp)
    lam, alpha = float(hp["lambda"]), float(hp["alpha"])
    codec, X, y = _design(matrix)
    n, p = X.shape
    names = codec.encoded_columns
    means = X.mean(axis=0)
    sds = X.std(axis=0)
    keep = np.flatnonzero(sds > 0)
    Z = (X[:, keep] - means[keep]) / sds[keep]
    yc = y - y.mean()

    beta = np.zeros(keep.size)
    resid = yc.copy()
    denom = 1.0 + lam * (1.0 - alpha)
    thresh = lam * alpha
    for sweep in range(CD_MAX_SWEEPS):
        max_delta = 0.0
        for j in range(keep.size):
            bj = beta[j]
            rho = (Z[:, j] @ resid) / n + bj
            bnew = soft_threshold(rho, thresh) / denom
            if bnew != bj:
                resid -= (bnew - bj) * Z[:, j]
                delta = abs(bnew - bj)
                if delta > max_delta:
                    max_delta = delta
                beta[j] = bnew
        if max_delta < CD_TOL:
            break
    else:
        raise ConvergenceError(
            f"glmnet did not converge in {CD_MAX_SWEEPS} sweeps; "
            f"last max coefficient change {max_delta:.3e}")

    coefs = np.zeros(p)
    coefs[keep] = beta / sds[keep]
    intercept = float(y.mean() - means @ coefs)
    dropped = tuple(names[j] for j in range(p) if sds[j] == 0.0)
    return LinearFit("glmnet", tuple(codec.feature_columns), tuple(names),
                     coefs, intercept, (means, sds), dropped, hp)


def glmnet_kkt_gaps(fit: LinearFit, matrix: ModelMatrix):
    """Per-feature KKT diagnostics on the fit's own training matrix.

    Returns (correlations, betas) on the standardized scale, where
    correlations[j] = (1/n) z_j' r. At an exact optimum |corr| <= lambda*alpha
    where beta_j == 0, and corr == lambda*alpha*sign(beta_j) + lambda*(1-alpha)*beta_j
    where beta_j != 0.
    """
    codec, X, y = _design(matrix)
    means, sds = fit.standardization
    keep = np.flatnonzero(sds > 0)
    Z = (X[:, keep] - means[keep]) / sds[keep]
    beta_std = fit.coefficients[keep] * sds[keep]
    resid = (y - y.mean()) - Z @ beta_std
    corr = Z.T @ resid / len(y)
    return corr, beta_std
