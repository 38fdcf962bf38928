"""Data exploration: correlations, class imbalance, mutual-information ranking."""

from __future__ import annotations

import numpy as np

from ..data import CATEGORICAL, CONTINUOUS, TabularBatch
from ..errors import SchemaError
from ..preprocessing import digitize, quantile_edges
from ..results import CorrelationResult, FeatureSelectionResult, ImbalanceResult

N_BINS = 10


def _codes(batch: TabularBatch, name: str) -> np.ndarray:
    """Integer codes: categories by index, continuous columns via KBins(10)."""
    col = batch.column(name)
    if batch.schema.kind(name) == CATEGORICAL:
        index = {c: i for i, c in enumerate(batch.schema.categories[name])}
        return np.array([index.get(v, -1) for v in col], dtype=int)
    vals = col.astype(float)
    present = vals[~np.isnan(vals)]
    if present.size == 0:
        return np.full(len(vals), -1)
    codes = digitize(vals, quantile_edges(present, N_BINS))
    return np.where(np.isnan(vals), -1, codes)


def contingency(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Counts table over rows where both codes are present (code >= 0)."""
    keep = (a >= 0) & (b >= 0)
    a, b = a[keep], b[keep]
    if a.size == 0:
        return np.zeros((0, 0))
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1.0)
    return table


def cramers_v(table: np.ndarray) -> float:
    n = table.sum()
    if n == 0 or min(table.shape) < 2:
        return 0.0
    expected = np.outer(table.sum(axis=1), table.sum(axis=0)) / n
    chi2 = float(np.sum((table - expected) ** 2 / expected))
    return float(np.sqrt(chi2 / (n * (min(table.shape) - 1))))


def mutual_information(table: np.ndarray) -> float:
    """Plug-in MI in nats."""
    n = table.sum()
    if n == 0:
        return 0.0
    pxy = table / n
    px = pxy.sum(axis=1, keepdims=True)
    py = pxy.sum(axis=0, keepdims=True)
    nz = pxy > 0
    return max(0.0, float(np.sum(pxy[nz] * np.log(pxy[nz] / (px @ py)[nz]))))


def _is_constant(batch: TabularBatch, name: str) -> bool:
    col = batch.column(name)
    if batch.schema.kind(name) == CONTINUOUS:
        vals = col[~np.isnan(col)]
        return vals.size == 0 or bool(np.all(vals == vals[0]))
    present = {v for v in col if v is not None}
    return len(present) <= 1


def correlation_matrix(batch: TabularBatch) -> CorrelationResult:
    """Pearson for continuous pairs, Cramér's V otherwise (continuous side binned)."""
    if batch.n_rows < 2:
        raise ValueError("correlation needs at least 2 rows")
    names = batch.schema.names
    d = len(names)
    constant = [_is_constant(batch, n) for n in names]
    codes = {n: _codes(batch, n) for n in names}
    mat = np.zeros((d, d))
    methods = [["" for _ in range(d)] for _ in range(d)]
    for i in range(d):
        for j in range(i, d):
            a, b = names[i], names[j]
            both_cont = batch.schema.kind(a) == CONTINUOUS and batch.schema.kind(b) == CONTINUOUS
            method = "pearson" if both_cont else "cramers_v"
            if constant[i] or constant[j]:
                value = 0.0
            elif i == j:
                value = 1.0
            elif both_cont:
                x, y = batch.column(a), batch.column(b)
                keep = ~(np.isnan(x) | np.isnan(y))
                value = float(np.clip(np.corrcoef(x[keep], y[keep])[0, 1], -1.0, 1.0)) if keep.sum() > 1 else 0.0
                if not np.isfinite(value):
                    value = 0.0
            else:
                value = min(1.0, cramers_v(contingency(codes[a], codes[b])))
            mat[i, j] = mat[j, i] = value
            methods[i][j] = methods[j][i] = method
    return CorrelationResult(names, mat, methods, constant)


def class_imbalance(batch: TabularBatch, target: str | None = None, by: str | None = None) -> ImbalanceResult:
    target = target or batch.schema.target
    if target is None:
        raise SchemaError("class imbalance needs a target column")
    if batch.schema.kind(target) != CATEGORICAL:
        raise SchemaError(f"target {target!r} is continuous; class imbalance needs a categorical target")
    labels = list(batch.schema.categories[target])
    col = batch.column(target)
    counts = [int(sum(1 for v in col if v == lab)) for lab in labels]
    total = sum(counts)
    freqs = [c / total if total else 0.0 for c in counts]
    by_labels, cross = [], []
    if by is not None:
        if batch.schema.kind(by) != CATEGORICAL:
            raise SchemaError(f"cross-tab feature {by!r} must be categorical")
        by_labels = list(batch.schema.categories[by])
        other = batch.column(by)
        cross = [[int(sum(1 for u, v in zip(other, col) if u == bl and v == lab)) for lab in labels]
                 for bl in by_labels]
    return ImbalanceResult(target, labels, counts, freqs, by, by_labels, cross)


def select_features(batch: TabularBatch, target: str | None = None, k: int = 5) -> FeatureSelectionResult:
    """Rank features by plug-in MI with the target; ties keep schema order."""
    target = target or batch.schema.target
    if target is None:
        raise SchemaError("feature selection needs a target column")
    if k < 1:
        raise ValueError("k must be >= 1")
    features = [n for n in batch.schema.names if n != target]
    t = _codes(batch, target)
    scores = [mutual_information(contingency(_codes(batch, f), t)) for f in features]
    order = sorted(range(len(features)), key=lambda i: -scores[i])
    ranked = [features[i] for i in order]
    return FeatureSelectionResult(target, ranked, [scores[i] for i in order], ranked[:min(k, len(ranked))])
