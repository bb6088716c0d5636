"""Default hyperparameter search spaces and candidate ordering.

The glmnet lambda path is data-dependent (from lambda_max down four decades),
so grids are built once per tuning run from the earliest training window and
frozen for the rest of the run.
"""
from __future__ import annotations

import numpy as np

from ..errors import ContractError
from ..features import ModelMatrix
from .codec import OneHotCodec, canonical_order

GLMNET_PATH_POINTS = 20
GLMNET_PATH_DECADES = 4
GLMNET_ALPHAS = (0.0, 0.5, 1.0)
GBM_N_TREES = (50, 150, 300)
GBM_DEPTHS = (1, 2, 3)
GBM_LEARNING_RATES = (0.05, 0.1)
GBM_MIN_NODE = 10
RF_N_TREES = 300
RF_MIN_NODES = (5, 10)
KNN_KS = (3, 5, 7, 9, 15, 25)


def glmnet_lambda_max(matrix: ModelMatrix) -> float:
    """Smallest lambda (at alpha=1) that zeroes every coefficient."""
    frame = canonical_order(matrix.frame)
    codec = OneHotCodec([c for c in frame.columns if c != "target"])
    X = codec.encode(frame[codec.feature_columns])
    y = frame["target"].to_numpy(dtype=float)
    sds = X.std(axis=0)
    keep = sds > 0
    Z = (X[:, keep] - X[:, keep].mean(axis=0)) / sds[keep]
    yc = y - y.mean()
    return float(np.max(np.abs(Z.T @ yc)) / len(y))


def default_grid(model_id: str, matrix: ModelMatrix | None = None) -> list:
    if model_id == "lm":
        return [{}]
    if model_id == "glmnet":
        if matrix is None:
            raise ContractError("glmnet grid needs a reference matrix for lambda_max")
        lam_max = glmnet_lambda_max(matrix)
        lams = np.exp(np.linspace(np.log(lam_max), np.log(lam_max) - GLMNET_PATH_DECADES * np.log(10),
                                  GLMNET_PATH_POINTS))
        return [{"lambda": float(l), "alpha": a} for a in GLMNET_ALPHAS for l in lams]
    if model_id == "gbm":
        return [{"n_trees": nt, "depth": d, "learning_rate": lr, "min_node": GBM_MIN_NODE}
                for nt in GBM_N_TREES for d in GBM_DEPTHS for lr in GBM_LEARNING_RATES]
    if model_id == "rf":
        if matrix is None:
            raise ContractError("rf grid needs a reference matrix for mtry choices")
        p = len(matrix.feature_columns)
        mtries = sorted({max(1, p // 3), max(1, int(np.sqrt(p))), p})
        return [{"n_trees": RF_N_TREES, "mtry": m, "min_node": mn}
                for m in mtries for mn in RF_MIN_NODES]
    if model_id == "knn":
        return [{"k": k} for k in KNN_KS]
    raise ContractError(f"no grid for model {model_id!r}")


def complexity_key(model_id: str, hp: dict) -> tuple:
    """Simplicity ordering for tie-breaks: smaller key = simpler model
    (fewer trees, shallower depth, larger lambda, smaller k)."""
    if model_id == "lm":
        return ()
    if model_id == "glmnet":
        return (-hp["lambda"], hp["alpha"])
    if model_id == "gbm":
        return (hp["n_trees"], hp["depth"], hp["learning_rate"], -hp["min_node"])
    if model_id == "rf":
        return (hp["n_trees"], -hp["min_node"], hp["mtry"])
    if model_id == "knn":
        return (hp["k"],)
    raise ContractError(f"no complexity ordering for model {model_id!r}")
