"""Random forest regression: bagged CART trees with per-split feature subsampling."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..features import ModelMatrix
from ..seeds import derive_rng
from .base import FittedModel, check_hyperparams
from .codec import TreeCodec, canonical_order
from .tree import RegressionTree, grow_tree


@dataclass(frozen=True)
class ForestFit(FittedModel):
    KINDS = ("rf",)

    model_id: str
    feature_columns: tuple
    trees: tuple
    hyperparams: dict
    seed: int

    def predict_frame(self, frame: pd.DataFrame) -> np.ndarray:
        codec = TreeCodec(self.feature_columns)
        X = codec.encode(frame)
        out = np.zeros(X.shape[0])
        for tree in self.trees:
            out += tree.predict_matrix(X)
        return out / len(self.trees)

    def to_json_dict(self) -> dict:
        return {
            "kind": "rf",
            "schema_version": 1,
            "feature_columns": list(self.feature_columns),
            "trees": [t.to_json_dict() for t in self.trees],
            "hyperparams": self.hyperparams,
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "ForestFit":
        return cls(
            model_id="rf",
            feature_columns=tuple(doc["feature_columns"]),
            trees=tuple(RegressionTree.from_json_dict(t) for t in doc["trees"]),
            hyperparams=dict(doc["hyperparams"]),
            seed=int(doc["seed"]),
        )


def fit_rf(matrix: ModelMatrix, hp: dict, seed: int = 0, bootstrap: bool = True) -> ForestFit:
    """Each tree sees a bootstrap resample and `mtry` candidate features per
    split. Per-tree rngs derive from (seed, tree index), so fits are invariant
    to training row order. ``bootstrap=False`` is a test hook.
    """
    hp = check_hyperparams("rf", hp)
    frame = canonical_order(matrix.frame)
    codec = TreeCodec([c for c in frame.columns if c != "target"])
    X = codec.encode(frame[codec.feature_columns])
    y = frame["target"].to_numpy(dtype=float)
    n, p = X.shape
    mtry = min(int(hp["mtry"]), p)

    trees = []
    for i in range(int(hp["n_trees"])):
        rng = derive_rng(seed, "rf-tree", i)
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        tree, _ = grow_tree(X[idx], y[idx], codec.categorical,
                            max_depth=None, min_node=int(hp["min_node"]),
                            mtry=mtry, rng=rng)
        trees.append(tree)
    return ForestFit("rf", tuple(codec.feature_columns), tuple(trees), hp, seed)
