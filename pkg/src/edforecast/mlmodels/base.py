"""Shared fitted-model contract, hyperparameter validation, serialization."""
from __future__ import annotations

import json
from abc import ABC, abstractmethod

import numpy as np
import pandas as pd

from ..errors import ContractError

# Declared hyperparameter ranges; unknown keys are rejected.
HP_SCHEMA = {
    "lm": {},
    "glmnet": {
        "lambda": lambda v: v >= 0,
        "alpha": lambda v: 0.0 <= v <= 1.0,
    },
    "gbm": {
        "n_trees": lambda v: int(v) == v and v >= 1,
        "depth": lambda v: int(v) == v and v >= 1,
        "learning_rate": lambda v: 0.0 < v <= 1.0,
        "min_node": lambda v: int(v) == v and v >= 1,
    },
    "rf": {
        "n_trees": lambda v: int(v) == v and v >= 1,
        "mtry": lambda v: int(v) == v and v >= 1,
        "min_node": lambda v: int(v) == v and v >= 1,
    },
    "knn": {
        "k": lambda v: int(v) == v and v >= 1,
    },
}

# gbm learning_rate == 0 is allowed as a degenerate test case.
HP_OPTIONAL_RELAXED = {("gbm", "learning_rate"): lambda v: 0.0 <= v <= 1.0}


def check_hyperparams(model_id: str, hp: dict, allow_zero_lr: bool = True) -> dict:
    if model_id not in HP_SCHEMA:
        raise ContractError(f"unknown model {model_id!r}")
    schema = HP_SCHEMA[model_id]
    unknown = sorted(set(hp) - set(schema))
    if unknown:
        raise ContractError(f"unknown hyperparameters for {model_id}: {unknown}")
    for key, check in schema.items():
        if key not in hp:
            raise ContractError(f"{model_id} requires hyperparameter {key!r}")
        value = hp[key]
        relaxed = HP_OPTIONAL_RELAXED.get((model_id, key))
        ok = (relaxed(value) if (allow_zero_lr and relaxed) else check(value))
        if not ok:
            raise ContractError(f"{model_id} hyperparameter {key}={value!r} out of range")
    return dict(hp)


class FittedModel(ABC):
    """Immutable trained regressor with a uniform predict contract."""

    model_id: str
    feature_columns: list

    @abstractmethod
    def predict_frame(self, frame: pd.DataFrame) -> np.ndarray:
        ...

    def predict_row(self, row) -> float:
        frame = pd.DataFrame([dict(row)])
        return float(self.predict_frame(frame)[0])

    @abstractmethod
    def to_json_dict(self) -> dict:
        ...

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def model_from_json_dict(doc: dict) -> FittedModel:
    from .linear import LinearFit
    from .boosting import GbmFit
    from .forest import ForestFit
    from .knn import KnnFit

    kind = doc.get("kind")
    for cls in (LinearFit, GbmFit, ForestFit, KnnFit):
        if kind in cls.KINDS:
            return cls.from_json_dict(doc)
    raise ContractError(f"unknown model snapshot kind {kind!r}")
