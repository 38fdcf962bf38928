"""Max-z-score threshold detector for univariate windows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..data import TimeseriesWindow
from ..errors import SchemaError

STD_FLOOR = 1e-12


@dataclass(frozen=True)
class Detection:
    score: float
    is_anomaly: bool
    deviations: np.ndarray


@dataclass(frozen=True)
class ThresholdDetector:
    """Flags a window when ``max_t |x_t - mean| / std > kappa`` (strict)."""

    train_mean: float
    train_std: float
    kappa: float = 3.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError("kappa must be positive")
        object.__setattr__(self, "train_std", max(float(self.train_std), STD_FLOOR))

    def deviations(self, values) -> np.ndarray:
        return np.abs(np.asarray(values, dtype=float) - self.train_mean) / self.train_std

    def score_values(self, values) -> float:
        return float(np.max(self.deviations(values)))

    def score(self, window: TimeseriesWindow) -> float:
        return self.score_values(window.values)

    def detect(self, window: TimeseriesWindow) -> Detection:
        dev = self.deviations(window.values)
        score = float(np.max(dev))
        return Detection(score, score > self.kappa, dev)

    def to_dict(self) -> dict:
        return {"train_mean": self.train_mean, "train_std": self.train_std, "kappa": self.kappa}


def fit_detector(train: TimeseriesWindow, kappa: float = 3.0) -> ThresholdDetector:
    if len(train) < 2:
        raise SchemaError("detector training needs at least 2 points")
    return ThresholdDetector(float(np.mean(train.values)), float(np.std(train.values)), kappa)


def detect(d: ThresholdDetector, window: TimeseriesWindow) -> Detection:
    return d.detect(window)
