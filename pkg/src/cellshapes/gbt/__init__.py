"""Boosted-tree classifier package: compiled split-scan core with a
pure-numpy fallback selected at import time (see ``_backend``)."""

from ._backend import BACKEND_NAME
from .model import (
    GbtModel,
    HyperParams,
    Tree,
    feature_importance,
    from_dict,
    load,
    margin_scores,
    predict,
    predict_proba,
    save,
    to_dict,
    train,
)

__all__ = [
    "BACKEND_NAME", "GbtModel", "HyperParams", "Tree", "feature_importance",
    "from_dict", "load", "margin_scores", "predict", "predict_proba", "save",
    "to_dict", "train",
]
