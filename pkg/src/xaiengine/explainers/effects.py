"""Global effect explainers: partial dependence, ALE and Morris screening."""

from __future__ import annotations

import math

import numpy as np

from ..data import CATEGORICAL, TabularBatch
from ..errors import SchemaError
from ..models.base import ModelHandle
from ..preprocessing import FittedTransform, quantile_edges
from ..results import ALEResult, PDPResult, SensitivityResult
from .common import feature_space


def _mean_rows(block: np.ndarray) -> list:
    """Exactly rounded column means of ``block`` (order-independent)."""
    n = block.shape[0]
    return [math.fsum(block[:, c]) / n for c in range(block.shape[1])]


def _substituted(bg_enc: np.ndarray, group: np.ndarray, blocks: np.ndarray) -> np.ndarray:
    """Stack copies of the background, one per row of ``blocks``, with ``group`` overwritten."""
    g, n = blocks.shape[0], bg_enc.shape[0]
    rows = np.repeat(bg_enc[None, :, :], g, axis=0)
    rows[:, :, group] = blocks[:, None, :]
    return rows.reshape(g * n, -1)


def pdp_grid(space, background: TabularBatch, feature: str, grid_size: int) -> list:
    stats = space.transform.column_stats(feature)
    if stats.kind == CATEGORICAL:
        return list(background.schema.categories.get(feature, stats.categories))
    col = space.transform.fill_column(feature, background.column(feature))
    return [float(v) for v in np.unique(np.quantile(col, np.linspace(0.0, 1.0, grid_size)))]


def pdp(model: ModelHandle, background: TabularBatch, feature: str, grid_size: int = 20,
        transform: FittedTransform | None = None, ice: int = 0, batch_size: int = 4096) -> PDPResult:
    """Mean prediction with ``feature`` forced to each grid value; no sampling involved."""
    if background.n_rows == 0:
        raise ValueError("pdp needs a non-empty background")
    space = feature_space(model, transform, background, batch_size)
    if feature not in space.names:
        raise SchemaError(f"unknown feature {feature!r}")
    j = space.names.index(feature)
    group = space.groups[j]
    grid = pdp_grid(space, background, feature, grid_size)
    blocks = space.transform.transform_column(feature, np.array(grid, dtype=object if isinstance(grid[0], str)
                                                                      else float))
    bg = space.encode(background)
    n = bg.shape[0]
    preds = space.predict(_substituted(bg, group, blocks)).reshape(len(grid), n, -1)
    means = [_mean_rows(preds[g]) for g in range(len(grid))]
    curves = preds[:, :ice, :].transpose(1, 0, 2) if ice else []
    kind = space.transform.column_stats(feature).kind
    return PDPResult(feature, kind, grid, means, list(model.labels), curves)


def ale(model: ModelHandle, background: TabularBatch, feature: str, n_bins: int = 10,
        transform: FittedTransform | None = None, batch_size: int = 4096) -> ALEResult:
    """First-order ALE on quantile bins, centered to a count-weighted mean of zero."""
    space = feature_space(model, transform, background, batch_size)
    if feature not in space.names:
        raise SchemaError(f"unknown feature {feature!r}")
    stats = space.transform.column_stats(feature)
    if stats.kind == CATEGORICAL:
        raise SchemaError(f"ALE does not support categorical feature {feature!r}")
    col = space.transform.fill_column(feature, background.column(feature))
    if len(np.unique(col)) < n_bins:
        raise ValueError(f"feature {feature!r} has fewer than {n_bins} distinct values")
    edges = quantile_edges(col, n_bins)
    b = len(edges) - 1
    # bin k holds edges[k] < x <= edges[k+1]; the first bin also holds the minimum
    bins = np.clip(np.searchsorted(edges, col, side="left") - 1, 0, b - 1)
    group = space.groups[space.names.index(feature)]
    bg = space.encode(background)
    lo = space.transform.transform_column(feature, edges[bins])
    hi = space.transform.transform_column(feature, edges[bins + 1])
    rows_lo, rows_hi = bg.copy(), bg.copy()
    rows_lo[:, group] = lo
    rows_hi[:, group] = hi
    preds = space.predict(np.vstack([rows_lo, rows_hi]))
    diff = preds[bg.shape[0]:] - preds[:bg.shape[0]]
    k = diff.shape[1]
    counts = np.bincount(bins, minlength=b)
    local = np.zeros((b, k))
    for i in range(b):
        if counts[i]:
            local[i] = diff[bins == i].mean(axis=0)
    acc = np.vstack([np.zeros((1, k)), np.cumsum(local, axis=0)])
    mids = (acc[:-1] + acc[1:]) / 2.0
    centered = acc - counts @ mids / counts.sum()
    return ALEResult(feature, edges, centered, counts, list(model.labels))


def morris(model: ModelHandle, train: TabularBatch, r: int = 10, p: int = 4, seed: int = 0,
           bounds: dict | None = None, transform: FittedTransform | None = None,
           output: int | None = None, batch_size: int = 4096) -> SensitivityResult:
    """Morris elementary effects from ``r`` one-at-a-time trajectories on a ``p``-level grid.

    Bounds default to the per-feature min/max of ``train``.
    """
    if r < 1:
        raise ValueError("need at least one trajectory")
    if p < 2 or p % 2:
        raise ValueError("p must be an even integer >= 2")
    space = feature_space(model, transform, train, batch_size)
    ft, names, d = space.transform, space.names, space.d
    cats = [n for n in names if ft.column_stats(n).kind == CATEGORICAL]
    if cats:
        raise SchemaError(f"Morris screening needs continuous features; categorical: {cats}")
    lo = np.empty(d)
    hi = np.empty(d)
    for j, n in enumerate(names):
        if bounds and n in bounds:
            lo[j], hi[j] = bounds[n]
        else:
            col = ft.fill_column(n, train.column(n))
            lo[j], hi[j] = float(np.min(col)), float(np.max(col))
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ValueError("Morris bounds must be finite")
    span = hi - lo
    k = model.n_outputs - 1 if output is None else int(output)

    rng = np.random.default_rng(seed)
    delta = p / (2.0 * (p - 1))
    levels = np.arange(p) / (p - 1)
    starts = levels[levels <= 1.0 - delta + 1e-12]
    units, moves = [], []
    for _ in range(r):
        base = rng.choice(starts, size=d)
        order = rng.permutation(d)
        signs = rng.choice([-1.0, 1.0], size=d)
        point = base + delta * (signs < 0)
        traj = [point.copy()]
        for j in order:
            point = point.copy()
            point[j] += signs[j] * delta
            traj.append(point)
        units.append(np.array(traj))
        moves.append((order, signs))
    unit = np.vstack(units)
    raw = lo + unit * span
    enc = np.hstack([ft.transform_column(n, raw[:, j]) for j, n in enumerate(names)])
    preds = space.predict(enc)[:, k].reshape(r, d + 1)

    effects = np.empty((r, d))
    for t, (order, signs) in enumerate(moves):
        for step, j in enumerate(order):
            effects[t, j] = (preds[t, step + 1] - preds[t, step]) / (signs[j] * delta)
    mu = effects.mean(axis=0)
    mu_star = np.abs(effects).mean(axis=0)
    sigma = effects.std(axis=0, ddof=1) if r > 1 else np.zeros(d)
    return SensitivityResult(names, mu, mu_star, sigma, r, p, k, model.labels[k])
