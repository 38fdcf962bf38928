"""Integrated gradients for differentiable handles."""

from __future__ import annotations

import numpy as np

from ..data import TabularBatch
from ..errors import CapabilityError
from ..models.base import ModelHandle
from ..preprocessing import FittedTransform
from ..results import FeatureAttribution
from .common import resolve_output


def integrated_gradients(model: ModelHandle, instance, baseline=None, steps: int = 256,
                         output: int | None = None, transform: FittedTransform | None = None,
                         feature_names=None) -> FeatureAttribution:
    """Midpoint-rule path integral of gradients from ``baseline`` to ``instance``.

    ``instance``/``baseline`` may be encoded vectors or one-row batches (then
    ``transform`` encodes them and scores are summed per source feature).
    A missing baseline means the zero vector in encoded space.
    """
    if not model.differentiable:
        raise CapabilityError("integrated gradients needs a differentiable model; use kernel_shap instead")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    shown = None
    if isinstance(instance, TabularBatch):
        if transform is None:
            raise ValueError("a transform is required to encode a TabularBatch instance")
        row = instance.row(0)
        shown = [row[n] for n in transform.feature_names]
        instance = transform.transform(instance)[0]
    if isinstance(baseline, TabularBatch):
        baseline = transform.transform(baseline)[0]
    x = np.asarray(instance, dtype=float).reshape(-1)
    b = np.zeros_like(x) if baseline is None else np.asarray(baseline, dtype=float).reshape(-1)
    if b.shape != x.shape:
        raise ValueError(f"baseline shape {b.shape} != instance shape {x.shape}")

    ends = model.predict(np.vstack([b, x]))
    k = resolve_output(model, ends[1], output)
    grads = np.array([model.gradient(b + (i - 0.5) / steps * (x - b), k) for i in range(1, steps + 1)])
    # mean taken as an offset from the first step, so a constant gradient averages to itself exactly
    mean_grad = grads[0] + (grads - grads[0]).sum(axis=0) / steps
    ig = (x - b) * mean_grad

    if transform is not None:
        names = transform.feature_names
        scores = [float(ig[g].sum()) for g in transform.groups]
    else:
        names = list(feature_names) if feature_names is not None else [f"x{j}" for j in range(len(x))]
        scores = ig
    if shown is None:
        shown = list(x) if transform is None else [None] * len(names)
    return FeatureAttribution("ig", names, shown, scores, k, model.labels[k], float(ends[0, k]),
                              float(ends[1, k]))
