"""Tabular LIME with quartile discretization and a weighted ridge surrogate."""

from __future__ import annotations

import numpy as np

from ..data import CONTINUOUS, TabularBatch
from ..models.base import ModelHandle
from ..preprocessing import FittedTransform
from ..results import FeatureAttribution
from .common import feature_space, resolve_output, shown_values, single_instance


def quartile_bins(train_col: np.ndarray, values: np.ndarray) -> np.ndarray:
    edges = np.quantile(train_col, [0.25, 0.5, 0.75])
    return np.searchsorted(edges, values, side="right")


def weighted_ridge(z: np.ndarray, y: np.ndarray, w: np.ndarray, alpha: float = 1.0) -> tuple[np.ndarray, float]:
    """Ridge with an unpenalized intercept; returns (coefficients, intercept)."""
    wsum = w.sum()
    zm = w @ z / wsum
    ym = w @ y / wsum
    zc, yc = z - zm, y - ym
    gram = (zc * w[:, None]).T @ zc + alpha * np.eye(z.shape[1])
    coef = np.linalg.solve(gram, (zc * w[:, None]).T @ yc)
    return coef, float(ym - zm @ coef)


def lime_explain(model: ModelHandle, train: TabularBatch, instance: TabularBatch, n_samples: int = 5000,
                 top_k: int | None = None, seed: int = 0, transform: FittedTransform | None = None,
                 output: int | None = None, kernel_width: float | None = None, ridge: float = 1.0,
                 batch_size: int = 4096) -> FeatureAttribution:
    single_instance(instance)
    space = feature_space(model, transform, train, batch_size)
    ft, d = space.transform, space.d
    if n_samples < d + 2:
        raise ValueError(f"n_samples={n_samples} is underdetermined for {d} features (need >= {d + 2})")
    rng = np.random.default_rng(seed)
    train_enc = space.encode(train)
    x_enc = space.encode(instance)[0]

    matrix = np.empty((n_samples, ft.width))
    z = np.empty((n_samples, d))
    for j, (s, g) in enumerate(zip(ft.stats, space.groups)):
        idx = rng.integers(0, train.n_rows, size=n_samples)
        matrix[:, g] = train_enc[idx][:, g]
        col = ft.fill_column(s.name, train.column(s.name))
        own = ft.fill_column(s.name, instance.column(s.name))
        if s.kind == CONTINUOUS:
            bins = quartile_bins(col, col[idx])
            z[:, j] = bins == quartile_bins(col, own)[0]
        else:
            z[:, j] = col[idx] == own[0]
    # the first perturbation is the instance itself
    matrix[0] = x_enc
    z[0] = 1.0

    preds = space.predict(matrix)
    k = resolve_output(model, preds[0], output)
    y = preds[:, k]
    width = kernel_width if kernel_width is not None else 0.75 * np.sqrt(d)
    dist = d - z.sum(axis=1)
    weights = np.exp(-(dist ** 2) / width ** 2)
    coef, _ = weighted_ridge(z, y, weights, ridge)
    if top_k is not None and top_k < d:
        keep = np.argsort(-np.abs(coef), kind="stable")[:top_k]
        mask = np.zeros(d, dtype=bool)
        mask[keep] = True
        coef = np.where(mask, coef, 0.0)
    return FeatureAttribution("lime", space.names, shown_values(instance, space.names), coef, k,
                              model.labels[k], None, float(y[0]))
