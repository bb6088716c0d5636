"""k-nearest-neighbour regression on standardized features."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..errors import ContractError
from ..features import ModelMatrix
from .base import FittedModel, check_hyperparams
from .codec import OneHotCodec, canonical_order


@dataclass(frozen=True)
class KnnFit(FittedModel):
    KINDS = ("knn",)

    model_id: str
    feature_columns: tuple
    k: int
    train_encoded: np.ndarray     # standardized training rows, canonical order
    train_targets: np.ndarray
    means: np.ndarray
    sds: np.ndarray               # zero-variance columns keep sd 0 and weight 0
    hyperparams: dict

    def _standardize(self, X):
        Z = np.zeros_like(X)
        live = self.sds > 0
        Z[:, live] = (X[:, live] - self.means[live]) / self.sds[live]
        return Z

    def predict_frame(self, frame: pd.DataFrame) -> np.ndarray:
        codec = OneHotCodec(self.feature_columns)
        Z = self._standardize(codec.encode(frame))
        out = np.empty(Z.shape[0])
        for i in range(Z.shape[0]):
            d2 = np.sum((self.train_encoded - Z[i]) ** 2, axis=1)
            # stable sort: ties at the k-th distance resolve to earlier rows
            nearest = np.argsort(d2, kind="stable")[:self.k]
            out[i] = self.train_targets[nearest].mean()
        return out

    def to_json_dict(self) -> dict:
        return {
            "kind": "knn",
            "schema_version": 1,
            "feature_columns": list(self.feature_columns),
            "k": self.k,
            "train_encoded": [[repr(float(v)) for v in row] for row in self.train_encoded],
            "train_targets": [repr(float(v)) for v in self.train_targets],
            "means": [repr(float(v)) for v in self.means],
            "sds": [repr(float(v)) for v in self.sds],
            "hyperparams": self.hyperparams,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "KnnFit":
        return cls(
            model_id="knn",
            feature_columns=tuple(doc["feature_columns"]),
            k=int(doc["k"]),
            train_encoded=np.array([[float(v) for v in row] for row in doc["train_encoded"]]),
            train_targets=np.array([float(v) for v in doc["train_targets"]]),
            means=np.array([float(v) for v in doc["means"]]),
            sds=np.array([float(v) for v in doc["sds"]]),
            hyperparams=dict(doc["hyperparams"]),
        )


def fit_knn(matrix: ModelMatrix, hp: dict) -> KnnFit:
    hp = check_hyperparams("knn", hp)
    k = int(hp["k"])
    if k > len(matrix):
        raise ContractError(f"k={k} exceeds {len(matrix)} training rows")
    frame = canonical_order(matrix.frame)
    codec = OneHotCodec([c for c in frame.columns if c != "target"])
    X = codec.encode(frame[codec.feature_columns])
    y = frame["target"].to_numpy(dtype=float)
    means = X.mean(axis=0)
    sds = X.std(axis=0)
    Z = np.zeros_like(X)
    live = sds > 0
    Z[:, live] = (X[:, live] - means[live]) / sds[live]
    return KnnFit("knn", tuple(codec.feature_columns), k, Z, y, means, sds, hp)
