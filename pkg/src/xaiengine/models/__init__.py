"""Model contract, built-in models, detector and external adapter."""

from __future__ import annotations

import logging
from typing import Mapping

import numpy as np

from ..errors import ModelError
from .base import (DIFFERENTIABLE, GLASS_LINEAR, GLASS_TREE, ModelHandle, function_model, require,
                   softmax)
from .detector import Detection, ThresholdDetector, detect, fit_detector
from .external import ExternalModel, spawn_external
from .linear import LinearModel, fit_least_squares, fit_logistic
from .mlp import MlpModel, fit_mlp, random_mlp
from .tree import TreeModel, grow_tree

logger = logging.getLogger(__name__)

KINDS = ("linear", "logistic", "tree", "mlp")
DEGENERATE = "degenerate-targets"

__all__ = [
    "DIFFERENTIABLE", "GLASS_LINEAR", "GLASS_TREE", "Detection", "ExternalModel", "LinearModel",
    "MlpModel", "ModelHandle", "ThresholdDetector", "TreeModel", "detect", "fit_detector",
    "function_model", "gradient", "load_model", "predict", "random_mlp", "require", "save_model",
    "softmax", "spawn_external", "train_builtin",
]


def _class_codes(targets, labels):
    targets = [str(t) for t in targets]
    if labels is None:
        labels = sorted(set(targets))
    labels = [str(lab) for lab in labels]
    index = {lab: i for i, lab in enumerate(labels)}
    unknown = sorted(set(targets) - set(index))
    if unknown:
        raise ModelError(f"targets contain labels outside {labels}: {unknown}")
    return np.array([index[t] for t in targets], dtype=int), labels


def train_builtin(kind: str, train, targets, config: Mapping | None = None) -> ModelHandle:
    """Fit a built-in model on an encoded matrix.

    ``config`` keys: ``task`` (classification/regression; default depends
    on ``kind``), ``labels`` (class order), ``seed``, ``lr``, ``max_iter``,
    ``tol``, ``l2``, ``hidden``, ``max_depth``, ``min_samples_split``.
    """
    config = dict(config or {})
    if kind not in KINDS:
        raise ModelError(f"unknown model kind {kind!r}; expected one of {KINDS}")
    x = np.asarray(train, dtype=float)
    if x.ndim != 2 or x.shape[0] < 1:
        raise ModelError("training matrix must be 2-D with at least one row")
    if len(targets) != x.shape[0]:
        raise ModelError(f"{len(targets)} targets for {x.shape[0]} training rows")
    default_task = {"linear": "regression", "logistic": "classification"}.get(kind, "classification")
    task = config.get("task", default_task)
    d = x.shape[1]

    if task == "regression":
        if kind == "logistic":
            raise ModelError("logistic regression needs a classification task")
        y = np.asarray(targets, dtype=float).reshape(-1, 1)
        if kind == "linear":
            return fit_least_squares(x, y).handle()
        if kind == "tree":
            tree = grow_tree(x, y, False, config.get("max_depth", 6), config.get("min_samples_split", 2))
            return tree.handle(d)
        return fit_mlp(x, y, tuple(config.get("hidden", (16,))), False, config.get("seed", 0),
                       config.get("lr", 0.1), config.get("max_iter", 2000), config.get("tol", 1e-6)).handle()

    codes, labels = _class_codes(targets, config.get("labels"))
    present = np.unique(codes)
    if len(present) == 1:
        label = labels[present[0]]
        logger.warning("all targets are %r; training a constant model", label)
        const = LinearModel(np.zeros((d, 1)), np.zeros(1), logistic=True).handle([label])
        return ModelHandle(const.task, 1, const.raw_predict, d, const.raw_jacobian, const.postprocess,
                           const.capabilities, (label,), const.model, (DEGENERATE,))
    k = len(labels)
    if kind == "linear":
        raise ModelError("linear kind is regression-only; use logistic for classification")
    if kind == "logistic":
        model = fit_logistic(x, codes, k, config.get("lr", 0.5), config.get("max_iter", 3000),
                             config.get("tol", 1e-7), config.get("l2", 1e-4))
        return model.handle(labels)
    onehot = np.zeros((len(codes), k))
    onehot[np.arange(len(codes)), codes] = 1.0
    if kind == "tree":
        tree = grow_tree(x, onehot, True, config.get("max_depth", 6), config.get("min_samples_split", 2))
        return tree.handle(d, labels)
    return fit_mlp(x, onehot, tuple(config.get("hidden", (16,))), True, config.get("seed", 0),
                   config.get("lr", 0.1), config.get("max_iter", 2000), config.get("tol", 1e-6)).handle(labels)


def predict(h: ModelHandle, x) -> np.ndarray:
    return h.predict(x)


def gradient(h: ModelHandle, x, k: int) -> np.ndarray:
    return h.gradient(x, k)


def save_model(h: ModelHandle) -> dict:
    """JSON-ready ``{"kind", "params"}`` document that rebuilds ``h`` bit-exactly."""
    m = h.model
    if isinstance(m, LinearModel):
        kind = "logistic" if m.logistic else "linear"
    elif isinstance(m, TreeModel):
        kind = "tree"
    elif isinstance(m, MlpModel):
        kind = "mlp"
    else:
        raise ModelError("only built-in models can be persisted")
    params = m.params()
    params["labels"] = list(h.labels)
    params["n_features"] = h.n_features
    params["flags"] = list(h.flags)
    return {"kind": kind, "params": params}


def load_model(doc: Mapping) -> ModelHandle:
    kind, p = doc.get("kind"), doc.get("params")
    if kind not in KINDS or not isinstance(p, Mapping):
        raise ModelError(f"malformed model document (kind={kind!r})")
    try:
        if kind in ("linear", "logistic"):
            h = LinearModel.from_params(p).handle(p.get("labels", ()))
        elif kind == "tree":
            h = TreeModel.from_params(p).handle(p["n_features"], p.get("labels", ()))
        else:
            h = MlpModel.from_params(p).handle(p.get("labels", ()))
    except (KeyError, ValueError, TypeError) as exc:
        raise ModelError(f"malformed {kind} parameters: {exc}") from None
    flags = tuple(p.get("flags", ()))
    if flags:
        h = ModelHandle(h.task, h.n_outputs, h.raw_predict, h.n_features, h.raw_jacobian, h.postprocess,
                        h.capabilities, h.labels, h.model, flags)
    return h
