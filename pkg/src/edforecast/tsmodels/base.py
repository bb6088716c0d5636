"""Uniform contract for the univariate time-series forecasters."""
from __future__ import annotations

import json
from abc import ABC, abstractmethod

import numpy as np

from ..errors import ContractError

DEFAULT_HORIZONS = (1, 3, 7)


def check_horizon(h: int, allowed=DEFAULT_HORIZONS):
    if h not in allowed:
        raise ContractError(f"horizon {h} not in allowed set {tuple(allowed)}")


class TsFit(ABC):
    """An immutable fitted univariate forecaster."""

    model_id: str

    @abstractmethod
    def forecast(self, h: int, allowed=DEFAULT_HORIZONS) -> float:
        """Point forecast for the h-th day after the training window end."""

    @abstractmethod
    def reforecast(self, values: np.ndarray, h: int, phase: int = 0,
                   allowed=DEFAULT_HORIZONS) -> float:
        """Forecast from a new window with all fitted parameters frozen.

        `phase` is the day offset of values[0] relative to the original
        training window start (needed where a weekly pattern is replayed).
        """

    @abstractmethod
    def to_json_dict(self) -> dict:
        ...

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def ts_fit_from_json_dict(doc: dict) -> TsFit:
    from .arima import ArimaFit
    from .ets import EtsFit, HoltFit
    from .stlm import StlmFit
    from .structts import StructFit

    kind = doc.get("kind")
    for cls in (ArimaFit, EtsFit, HoltFit, StlmFit, StructFit):
        if kind == cls.KIND:
            return cls.from_json_dict(doc)
    raise ContractError(f"unknown ts model snapshot kind {kind!r}")
