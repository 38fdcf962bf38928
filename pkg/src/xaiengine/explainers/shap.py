"""KernelSHAP over source features, with exact enumeration for small ``d``."""

from __future__ import annotations

import itertools
from math import comb

import numpy as np

from ..data import TabularBatch
from ..models.base import ModelHandle
from ..preprocessing import FittedTransform
from ..results import FeatureAttribution
from .common import feature_space, resolve_output, shown_values, single_instance

MAX_BACKGROUND = 100


def shapley_kernel_weight(d: int, size: int) -> float:
    return (d - 1) / (comb(d, size) * size * (d - size))


class CoalitionValue:
    """``v(z)``: mean model output with absent features taken from background rows."""

    def __init__(self, space, background_enc: np.ndarray, instance_enc: np.ndarray):
        self.space = space
        self.background = background_enc
        self.instance = instance_enc
        owner = np.empty(space.transform.width, dtype=int)
        for j, g in enumerate(space.groups):
            owner[g] = j
        self.owner = owner

    def __call__(self, masks: np.ndarray) -> np.ndarray:
        """Masks ``(m, d)`` -> values ``(m, k)``."""
        masks = np.asarray(masks, dtype=bool)
        m, nb = masks.shape[0], self.background.shape[0]
        cols = masks[:, self.owner]  # (m, width)
        rows = np.where(cols[:, None, :], self.instance[None, None, :], self.background[None, :, :])
        preds = self.space.predict(rows.reshape(m * nb, -1))
        return preds.reshape(m, nb, -1).mean(axis=1)


def _all_coalitions(d: int) -> np.ndarray:
    masks = [m for m in itertools.product((0, 1), repeat=d) if 0 < sum(m) < d]
    return np.array(masks, dtype=bool).reshape(-1, d)


def _sample_coalitions(d: int, budget: int, rng: np.random.Generator):
    """Enumerate whole (paired) sizes while the budget allows, then sample the rest.

    Returns masks and their regression weights. Sampled coalitions of size
    ``s`` share that size's total kernel mass equally.
    """
    masks, weights = [], []
    remaining = list(range(1, d))
    left = budget
    for s in range(1, d // 2 + 1):
        pair = [s] if s == d - s else [s, d - s]
        need = sum(comb(d, t) for t in pair)
        if need > left:
            break
        for t in pair:
            for idx in itertools.combinations(range(d), t):
                m = np.zeros(d, dtype=bool)
                m[list(idx)] = True
                masks.append(m)
                weights.append(shapley_kernel_weight(d, t))
            remaining.remove(t)
        left -= need
    if left > 0 and remaining:
        mass = np.array([comb(d, s) * shapley_kernel_weight(d, s) for s in remaining])
        probs = mass / mass.sum()
        seen = set()
        drawn: dict[int, list] = {s: [] for s in remaining}
        capacity = sum(comb(d, s) for s in remaining)
        attempts = 0
        while sum(len(v) for v in drawn.values()) < min(left, capacity) and attempts < 50 * left:
            attempts += 1
            s = remaining[rng.choice(len(remaining), p=probs)]
            idx = tuple(sorted(rng.choice(d, size=s, replace=False).tolist()))
            if idx in seen:
                continue
            seen.add(idx)
            drawn[s].append(idx)
        for s, idxs in drawn.items():
            for idx in idxs:
                m = np.zeros(d, dtype=bool)
                m[list(idx)] = True
                masks.append(m)
                weights.append(comb(d, s) * shapley_kernel_weight(d, s) / len(idxs))
    return np.array(masks, dtype=bool).reshape(-1, d), np.array(weights)


def solve_constrained(masks: np.ndarray, weights: np.ndarray, values: np.ndarray, base: float,
                      total: float) -> np.ndarray:
    """Weighted least squares for ``phi`` subject to ``sum(phi) == total - base``."""
    d = masks.shape[1]
    delta = total - base
    if d == 1:
        return np.array([delta])
    z = masks.astype(float)
    y = values - base - z[:, -1] * delta
    x = z[:, :-1] - z[:, -1:]
    sw = np.sqrt(weights)
    head, *_ = np.linalg.lstsq(x * sw[:, None], y * sw, rcond=None)
    return np.append(head, delta - head.sum())


def kernel_shap(model: ModelHandle, background: TabularBatch, instance: TabularBatch,
                n_coalitions: int = 2048, seed: int = 0, transform: FittedTransform | None = None,
                output: int | None = None, max_background: int = MAX_BACKGROUND,
                batch_size: int = 4096) -> FeatureAttribution:
    """Shapley attribution of one instance against a background sample.

    Exact (all ``2^d - 2`` coalitions) when the budget allows, otherwise
    paired-size enumeration plus seeded sampling without replacement.
    """
    single_instance(instance)
    if background.n_rows == 0:
        raise ValueError("kernel_shap needs a non-empty background")
    space = feature_space(model, transform, background, batch_size)
    d = space.d
    if d == 0:
        raise ValueError("kernel_shap needs at least one feature")
    bg = space.encode(background)[:max_background]
    x = space.encode(instance)[0]
    value = CoalitionValue(space, bg, x)
    ends = value(np.array([[False] * d, [True] * d]))
    k = resolve_output(model, ends[1], output)
    base, fx = float(ends[0, k]), float(ends[1, k])

    if 2 ** d - 2 <= n_coalitions:
        masks = _all_coalitions(d)
        weights = np.array([shapley_kernel_weight(d, int(m.sum())) for m in masks])
    else:
        masks, weights = _sample_coalitions(d, n_coalitions, np.random.default_rng(seed))
    vals = value(masks)[:, k] if len(masks) else np.zeros(0)
    phi = solve_constrained(masks, weights, vals, base, fx)
    return FeatureAttribution("shap", space.names, shown_values(instance, space.names), phi, k,
                              model.labels[k], base, fx)
