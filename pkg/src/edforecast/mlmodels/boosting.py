"""Stagewise least-squares gradient boosting over depth-bounded CART trees."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..features import ModelMatrix
from .base import FittedModel, check_hyperparams
from .codec import TreeCodec, canonical_order
from .tree import RegressionTree, grow_tree


@dataclass(frozen=True)
class GbmFit(FittedModel):
    KINDS = ("gbm",)

    model_id: str
    feature_columns: tuple
    baseline: float                # F0 = mean(y)
    learning_rate: float
    trees: tuple                   # of RegressionTree
    train_loss: tuple              # training MSE after each boosting round
    hyperparams: dict

    def predict_frame(self, frame: pd.DataFrame) -> np.ndarray:
        codec = TreeCodec(self.feature_columns)
        X = codec.encode(frame)
        out = np.full(X.shape[0], self.baseline)
        for tree in self.trees:
            out += self.learning_rate * tree.predict_matrix(X)
        return out

    def to_json_dict(self) -> dict:
        return {
            "kind": "gbm",
            "schema_version": 1,
            "feature_columns": list(self.feature_columns),
            "baseline": repr(float(self.baseline)),
            "learning_rate": repr(float(self.learning_rate)),
            "trees": [t.to_json_dict() for t in self.trees],
            "train_loss": [repr(float(v)) for v in self.train_loss],
            "hyperparams": self.hyperparams,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "GbmFit":
        return cls(
            model_id="gbm",
            feature_columns=tuple(doc["feature_columns"]),
            baseline=float(doc["baseline"]),
            learning_rate=float(doc["learning_rate"]),
            trees=tuple(RegressionTree.from_json_dict(t) for t in doc["trees"]),
            train_loss=tuple(float(v) for v in doc["train_loss"]),
            hyperparams=dict(doc["hyperparams"]),
        )


def fit_gbm(matrix: ModelMatrix, hp: dict) -> GbmFit:
    """F_m = F_{m-1} + learning_rate * tree_m, tree_m fit to the residuals."""
    hp = check_hyperparams("gbm", hp)
    frame = canonical_order(matrix.frame)
    codec = TreeCodec([c for c in frame.columns if c != "target"])
    X = codec.encode(frame[codec.feature_columns])
    y = frame["target"].to_numpy(dtype=float)
    categorical = codec.categorical

    lr = float(hp["learning_rate"])
    baseline = float(y.mean())
    current = np.full(len(y), baseline)
    trees = []
    losses = []
    for _ in range(int(hp["n_trees"])):
        tree, pred = grow_tree(X, y - current, categorical,
                               max_depth=int(hp["depth"]), min_node=int(hp["min_node"]))
        current = current + lr * pred
        trees.append(tree)
        losses.append(float(np.mean((y - current) ** 2)))
    return GbmFit("gbm", tuple(codec.feature_columns), baseline, lr,
                  tuple(trees), tuple(losses), hp)
