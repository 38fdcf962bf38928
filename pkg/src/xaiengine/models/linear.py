"""Linear regression and multinomial logistic regression."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import DIFFERENTIABLE, GLASS_LINEAR, ModelHandle, affine, softmax


@dataclass(frozen=True)
class LinearModel:
    weights: np.ndarray  # (d, k)
    bias: np.ndarray  # (k,)
    logistic: bool = False

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.weights, dtype=float))
        if w.shape[0] == 1 and np.ndim(self.weights) == 1:
            w = w.T
        b = np.asarray(self.bias, dtype=float).reshape(-1)
        if w.shape[1] != b.shape[0]:
            raise ValueError(f"weights {w.shape} incompatible with bias {b.shape}")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("linear model parameters must be finite")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", b)

    def raw(self, x: np.ndarray) -> np.ndarray:
        return affine(x, self.weights, self.bias)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        return self.weights.T.copy()

    def handle(self, labels=()) -> ModelHandle:
        k = self.weights.shape[1]
        return ModelHandle(
            task="classification" if self.logistic else "regression",
            n_outputs=k,
            raw_predict=self.raw,
            n_features=self.weights.shape[0],
            raw_jacobian=self.jacobian,
            postprocess="softmax" if self.logistic else "none",
            capabilities=frozenset({DIFFERENTIABLE, GLASS_LINEAR}),
            labels=tuple(labels),
            model=self,
        )

    def params(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias.tolist(), "logistic": self.logistic}

    @classmethod
    def from_params(cls, p) -> "LinearModel":
        return cls(np.array(p["weights"], dtype=float).reshape(len(p["weights"]), -1),
                   np.array(p["bias"], dtype=float), bool(p.get("logistic", False)))


def fit_least_squares(x: np.ndarray, y: np.ndarray) -> LinearModel:
    y = np.asarray(y, dtype=float).reshape(len(y), -1)
    design = np.hstack([x, np.ones((x.shape[0], 1))])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return LinearModel(coef[:-1], coef[-1])


def fit_logistic(x: np.ndarray, codes: np.ndarray, n_classes: int, lr: float = 0.5,
                 max_iter: int = 3000, tol: float = 1e-7, l2: float = 1e-4) -> LinearModel:
    """Multinomial logistic regression by full-batch gradient descent from zero."""
    n, d = x.shape
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), codes] = 1.0
    w = np.zeros((d, n_classes))
    b = np.zeros(n_classes)
    for _ in range(max_iter):
        p = softmax(x @ w + b)
        err = (p - onehot) / n
        gw = x.T @ err + l2 * w
        gb = err.sum(axis=0)
        w -= lr * gw
        b -= lr * gb
        if max(np.abs(gw).max(initial=0.0), np.abs(gb).max()) < tol:
            break
    return LinearModel(w, b, logistic=True)
