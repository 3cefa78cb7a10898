"""Invoice closure prediction with gradient-boosted regression trees."""

from .gbt import GbtModel, GbtParams, Node, best_split, fit_gbt, grow_tree, predict_tree
from .model import (
    FEATURE_NAMES,
    FEATURE_VERSION,
    ClosureModel,
    ClosurePredictor,
    close_date_from_days,
    encode,
    encode_many,
    fit,
    fit_from_invoices,
    fit_matrix,
    predict_close_date,
    predict_close_dates,
)

__all__ = [
    "FEATURE_NAMES", "FEATURE_VERSION", "ClosureModel", "ClosurePredictor", "GbtModel",
    "GbtParams", "Node", "best_split", "close_date_from_days", "encode", "encode_many",
    "fit", "fit_from_invoices", "fit_gbt", "fit_matrix", "grow_tree", "predict_close_date",
    "predict_close_dates", "predict_tree",
]
