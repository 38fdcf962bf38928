"""The black-box prediction contract every explainer consumes."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import CapabilityError, ModelError

TASKS = ("classification", "regression", "anomaly-score")
DIFFERENTIABLE = "differentiable"
GLASS_LINEAR = "glass-linear"
GLASS_TREE = "glass-tree"


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - np.max(z, axis=1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=1, keepdims=True)


def affine(x: np.ndarray, weights: np.ndarray, bias: np.ndarray) -> np.ndarray:
    """``x @ weights + bias`` accumulated feature by feature.

    The fixed accumulation order makes every output row bitwise independent
    of the other rows in the batch, which BLAS matmul does not guarantee.
    """
    out = np.broadcast_to(bias, (x.shape[0], weights.shape[1])).copy()
    for j in range(weights.shape[0]):
        out += x[:, j:j + 1] * weights[j]
    return out


@dataclass(frozen=True)
class ModelHandle:
    """Prediction function plus the metadata explainers dispatch on.

    ``raw_predict`` maps an ``(n, d)`` matrix to raw outputs ``(n, k)``;
    when ``postprocess == "softmax"`` those are logits and :meth:`predict`
    returns probabilities. ``raw_jacobian`` (differentiable models only)
    returns the ``(k, d)`` Jacobian of the raw outputs at one point.
    """

    task: str
    n_outputs: int
    raw_predict: Callable[[np.ndarray], np.ndarray]
    n_features: int | None = None
    raw_jacobian: Callable[[np.ndarray], np.ndarray] | None = None
    postprocess: str = "none"
    capabilities: frozenset = field(default_factory=frozenset)
    labels: tuple = ()
    model: object = None
    flags: tuple = ()

    def __post_init__(self):
        if self.task not in TASKS:
            raise ModelError(f"unknown task {self.task!r}")
        if self.postprocess not in ("none", "softmax"):
            raise ModelError(f"unknown postprocess {self.postprocess!r}")
        caps = frozenset(self.capabilities)
        if (DIFFERENTIABLE in caps) != (self.raw_jacobian is not None):
            raise ModelError("gradient must be present iff the model is flagged differentiable")
        object.__setattr__(self, "capabilities", caps)
        if not self.labels:
            object.__setattr__(self, "labels", tuple(str(i) for i in range(self.n_outputs)))

    @property
    def differentiable(self) -> bool:
        return DIFFERENTIABLE in self.capabilities

    def predict(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        if self.n_features is not None and x.shape[1] != self.n_features:
            raise ModelError(f"input has {x.shape[1]} columns, model expects {self.n_features}")
        if x.shape[0] == 0:
            return np.zeros((0, self.n_outputs))
        out = np.asarray(self.raw_predict(x), dtype=float).reshape(x.shape[0], -1)
        if out.shape[1] != self.n_outputs:
            raise ModelError(f"model returned {out.shape[1]} outputs, expected {self.n_outputs}")
        if self.postprocess == "softmax":
            out = softmax(out)
        return out

    def gradient(self, x, k: int) -> np.ndarray:
        """Gradient of (post-processed) output ``k`` with respect to the input."""
        if not self.differentiable:
            raise CapabilityError("model is not differentiable; use a black-box explainer such as kernel_shap")
        x = np.asarray(x, dtype=float).reshape(-1)
        jac = np.asarray(self.raw_jacobian(x), dtype=float)
        if self.postprocess == "softmax":
            p = softmax(np.asarray(self.raw_predict(x.reshape(1, -1)), dtype=float))[0]
            return p[k] * (jac[k] - p @ jac)
        return jac[k].copy()

    def predicted_class(self, x) -> np.ndarray:
        return np.argmax(self.predict(x), axis=1)

    def with_predict(self, fn: Callable[[np.ndarray], np.ndarray]) -> "ModelHandle":
        """Same handle with ``raw_predict`` wrapped (e.g. for call counting)."""
        return ModelHandle(self.task, self.n_outputs, fn, self.n_features, self.raw_jacobian,
                           self.postprocess, self.capabilities, self.labels, self.model, self.flags)


def require(handle: ModelHandle, capability: str) -> None:
    if capability not in handle.capabilities:
        raise CapabilityError(f"model lacks the {capability!r} capability")


def function_model(fn: Callable[[np.ndarray], np.ndarray], n_outputs: int = 1, task: str = "regression",
                   n_features: int | None = None, labels: Sequence[str] = (),
                   postprocess: str = "none") -> ModelHandle:
    """Wrap a plain batched function as a black-box handle."""

    def raw(x):
        out = np.asarray(fn(x), dtype=float)
        return out.reshape(x.shape[0], -1)

    return ModelHandle(task, n_outputs, raw, n_features, labels=tuple(labels), postprocess=postprocess)
