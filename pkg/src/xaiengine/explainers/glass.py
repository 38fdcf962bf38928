"""Explanations read straight off glass models (linear weights, tree paths)."""

from __future__ import annotations

import numpy as np

from ..data import CONTINUOUS, TabularBatch
from ..models.base import GLASS_LINEAR, GLASS_TREE, ModelHandle, require
from ..preprocessing import FittedTransform
from ..results import DecisionPath, FeatureAttribution
from .common import feature_space, resolve_output, shown_values, single_instance


def glass_linear_explain(model: ModelHandle, instance: TabularBatch, transform: FittedTransform | None = None,
                         output: int | None = None) -> FeatureAttribution:
    """Per-feature ``w * x`` contributions (one-hot slots summed); base is the bias."""
    require(model, GLASS_LINEAR)
    single_instance(instance)
    space = feature_space(model, transform, instance)
    x = space.encode(instance)[0]
    lin = model.model
    k = resolve_output(model, model.predict(x)[0], output)
    contrib = x * lin.weights[:, k]
    scores = [float(contrib[g].sum()) for g in space.groups]
    raw = float(lin.raw(x.reshape(1, -1))[0, k])
    return FeatureAttribution("glass-linear", space.names, shown_values(instance, space.names), scores, k,
                              model.labels[k], float(lin.bias[k]), raw)


def _column_label(ft: FittedTransform, col: int) -> tuple[str, str]:
    source, slot = ft.layout[col]
    stats = ft.column_stats(source)
    if stats.encoding == "one-hot":
        return source, f"{source}={slot}"
    return source, source


def glass_tree_explain(model: ModelHandle, instance: TabularBatch,
                       transform: FittedTransform | None = None) -> DecisionPath:
    """Root-to-leaf path with training-row fractions; thresholds shown in raw units where affine."""
    require(model, GLASS_TREE)
    single_instance(instance)
    space = feature_space(model, transform, instance)
    ft = space.transform
    x = space.encode(instance)[0]
    tree = model.model
    nodes = tree.path(x)
    total = float(tree.n_samples[0])
    row = instance.row(0)
    steps = []
    for node in nodes[:-1]:
        col = int(tree.feature[node])
        thr = float(tree.threshold[node])
        source, label = _column_label(ft, col)
        stats = ft.column_stats(source)
        shown_thr = thr
        if stats.kind == CONTINUOUS and ft.slope(source) is not None:
            shown_thr = ft.inverse_column(source, np.array([[thr]]))[0]
        steps.append({
            "feature": label,
            "threshold": shown_thr,
            "value": row[source],
            "branch": "left" if x[col] < thr else "right",
            "fraction": tree.n_samples[node] / total,
        })
    leaf = nodes[-1]
    value = tree.value[leaf]
    label = model.labels[int(np.argmax(value))] if model.task == "classification" else ""
    return DecisionPath("glass-tree", steps, value, tree.n_samples[leaf] / total, label)
