"""Explainer implementations, grouped by what they explain."""

from .common import FeatureSpace, feature_space
from .counterfactual import CFProblem, mace_cf, make_problem, wachter_ce
from .effects import ale, morris, pdp
from .glass import glass_linear_explain, glass_tree_explain
from .gradients import integrated_gradients
from .insight import class_imbalance, correlation_matrix, select_features
from .lime import lime_explain
from .shap import kernel_shap
from .timeseries import segments, ts_counterfactual, ts_shap

__all__ = [
    "CFProblem", "FeatureSpace", "ale", "class_imbalance", "correlation_matrix", "feature_space",
    "glass_linear_explain", "glass_tree_explain", "integrated_gradients", "kernel_shap", "lime_explain",
    "mace_cf", "make_problem", "morris", "pdp", "segments", "select_features", "ts_counterfactual",
    "ts_shap", "wachter_ce",
]
