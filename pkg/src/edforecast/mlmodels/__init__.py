from .base import FittedModel, check_hyperparams, model_from_json_dict
from .codec import OneHotCodec, TreeCodec
from .linear import LinearFit, fit_lm, fit_glmnet
from .tree import RegressionTree
from .boosting import GbmFit, fit_gbm
from .forest import ForestFit, fit_rf
from .knn import KnnFit, fit_knn
from . import grids

__all__ = [
    "FittedModel", "check_hyperparams", "model_from_json_dict",
    "OneHotCodec", "TreeCodec",
    "LinearFit", "fit_lm", "fit_glmnet",
    "RegressionTree", "GbmFit", "fit_gbm", "ForestFit", "fit_rf",
    "KnnFit", "fit_knn", "grids",
]
