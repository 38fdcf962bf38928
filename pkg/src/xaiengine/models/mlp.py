"""Small fully connected network: tanh hidden layers, identity output."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import DIFFERENTIABLE, ModelHandle, affine, softmax


@dataclass(frozen=True)
class MlpModel:
    weights: tuple  # per layer (n_in, n_out)
    biases: tuple
    classification: bool = False

    def __post_init__(self):
        ws = tuple(np.asarray(w, dtype=float) for w in self.weights)
        bs = tuple(np.asarray(b, dtype=float).reshape(-1) for b in self.biases)
        if len(ws) != len(bs) or not ws:
            raise ValueError("need one bias vector per weight matrix")
        for i, (w, b) in enumerate(zip(ws, bs)):
            if w.ndim != 2 or w.shape[1] != b.shape[0]:
                raise ValueError(f"layer {i}: weight {w.shape} incompatible with bias {b.shape}")
            if i and ws[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i}: input width {w.shape[0]} != previous output {ws[i - 1].shape[1]}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError("MLP parameters must be finite")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def raw(self, x: np.ndarray) -> np.ndarray:
        a = x
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            a = affine(a, w, b)
            if i < len(self.weights) - 1:
                a = np.tanh(a)
        return a

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        a = x.reshape(1, -1)
        jac = np.eye(x.shape[0])
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = a @ w + b
            jac = w.T @ jac
            if i < len(self.weights) - 1:
                a = np.tanh(z)
                jac = (1.0 - a[0] ** 2)[:, None] * jac
        return jac

    def handle(self, labels=()) -> ModelHandle:
        return ModelHandle(
            task="classification" if self.classification else "regression",
            n_outputs=self.weights[-1].shape[1],
            raw_predict=self.raw,
            n_features=self.weights[0].shape[0],
            raw_jacobian=self.jacobian,
            postprocess="softmax" if self.classification else "none",
            capabilities=frozenset({DIFFERENTIABLE}),
            labels=tuple(labels),
            model=self,
        )

    def params(self) -> dict:
        return {"weights": [w.tolist() for w in self.weights], "biases": [b.tolist() for b in self.biases],
                "classification": self.classification}

    @classmethod
    def from_params(cls, p) -> "MlpModel":
        ws = [np.array(w, dtype=float).reshape(len(w), -1) for w in p["weights"]]
        return cls(tuple(ws), tuple(np.array(b, dtype=float) for b in p["biases"]), bool(p["classification"]))


def random_mlp(layer_sizes, seed: int = 0, scale: float = 1.0, classification: bool = False) -> MlpModel:
    """Glorot-normal initialised network; also used as a test fixture generator."""
    rng = np.random.default_rng(seed)
    ws, bs = [], []
    for n_in, n_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        ws.append(rng.normal(0.0, scale * np.sqrt(2.0 / (n_in + n_out)), size=(n_in, n_out)))
        bs.append(rng.normal(0.0, 0.1 * scale, size=n_out))
    return MlpModel(tuple(ws), tuple(bs), classification)


def fit_mlp(x: np.ndarray, y: np.ndarray, hidden=(16,), classification: bool = False, seed: int = 0,
            lr: float = 0.1, max_iter: int = 2000, tol: float = 1e-6) -> MlpModel:
    """Full-batch gradient descent on cross-entropy (classification) or half-MSE."""
    sizes = [x.shape[1], *hidden, y.shape[1]]
    init = random_mlp(sizes, seed)
    ws = [w.copy() for w in init.weights]
    bs = [b.copy() for b in init.biases]
    n = x.shape[0]
    for _ in range(max_iter):
        acts = [x]
        for i, (w, b) in enumerate(zip(ws, bs)):
            z = acts[-1] @ w + b
            acts.append(np.tanh(z) if i < len(ws) - 1 else z)
        out = acts[-1]
        delta = (softmax(out) - y) / n if classification else (out - y) / n
        grads = []
        for i in range(len(ws) - 1, -1, -1):
            grads.append((acts[i].T @ delta, delta.sum(axis=0)))
            if i:
                delta = (delta @ ws[i].T) * (1.0 - acts[i] ** 2)
        grads.reverse()
        gmax = 0.0
        for i, (gw, gb) in enumerate(grads):
            ws[i] -= lr * gw
            bs[i] -= lr * gb
            gmax = max(gmax, np.abs(gw).max(initial=0.0), np.abs(gb).max(initial=0.0))
        if gmax < tol:
            break
    return MlpModel(tuple(ws), tuple(bs), classification)
