"""Explanation result types.

Every result is a dataclass holding plain Python values (lists, floats,
strings) so that it compares by value and survives a JSON round trip
unchanged. ``to_dict`` adds a ``"type"`` tag used by :func:`result_from_dict`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from typing import Any, ClassVar

import numpy as np

_TYPES: dict[str, type] = {}


def plain(value):
    """Recursively convert numpy containers/scalars and tuples to JSON-ready values."""
    if isinstance(value, np.ndarray):
        return plain(value.tolist())
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return None if math.isnan(v) else v
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, dict):
        return {str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    return value


class Result:
    type_name: ClassVar[str] = ""

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        if cls.type_name:
            _TYPES[cls.type_name] = cls

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, plain(getattr(self, f.name)))

    def to_dict(self) -> dict:
        out = {"type": self.type_name}
        out.update({f.name: getattr(self, f.name) for f in fields(self)})
        return out


def result_from_dict(doc: dict) -> Any:
    doc = dict(doc)
    cls = _TYPES.get(doc.pop("type", None))
    if cls is None:
        raise ValueError(f"unknown result type in {sorted(doc)}")
    return cls(**doc)


@dataclass(frozen=True)
class FeatureAttribution(Result):
    type_name: ClassVar[str] = "feature_attribution"

    explainer: str
    features: list
    values: list
    scores: list
    output_index: int = 0
    output_label: str = ""
    base_value: float | None = None
    prediction: float | None = None

    def score_of(self, name: str) -> float:
        return self.scores[self.features.index(name)]

    def ranking(self) -> list[str]:
        """Feature names by decreasing ``|score|`` (ties keep feature order)."""
        order = sorted(range(len(self.scores)), key=lambda i: -abs(self.scores[i]))
        return [self.features[i] for i in order]


@dataclass(frozen=True)
class DecisionPath(Result):
    type_name: ClassVar[str] = "decision_path"

    explainer: str
    steps: list  # [{"feature", "threshold", "value", "branch", "fraction"}]
    leaf_value: list
    leaf_fraction: float
    predicted_label: str = ""


@dataclass(frozen=True)
class PDPResult(Result):
    type_name: ClassVar[str] = "pdp"

    feature: str
    kind: str
    grid: list
    means: list  # (G, k)
    output_labels: list
    ice: list = field(default_factory=list)  # (n_ice, G, k)

    @property
    def ice_count(self) -> int:
        return len(self.ice)


@dataclass(frozen=True)
class ALEResult(Result):
    type_name: ClassVar[str] = "ale"

    feature: str
    edges: list
    effects: list  # (B+1, k), centered
    counts: list
    output_labels: list

    def weighted_mean(self) -> list[float]:
        """Count-weighted mean of the bin-midpoint effects; zero after centering."""
        eff = np.asarray(self.effects, dtype=float)
        counts = np.asarray(self.counts, dtype=float)
        mids = (eff[:-1] + eff[1:]) / 2.0
        return list(counts @ mids / counts.sum())


@dataclass(frozen=True)
class SensitivityResult(Result):
    type_name: ClassVar[str] = "morris"

    features: list
    mu: list
    mu_star: list
    sigma: list
    trajectories: int
    levels: int
    output_index: int = 0
    output_label: str = ""


@dataclass(frozen=True)
class CorrelationResult(Result):
    type_name: ClassVar[str] = "correlation"

    features: list
    matrix: list
    methods: list
    constant: list


@dataclass(frozen=True)
class ImbalanceResult(Result):
    type_name: ClassVar[str] = "imbalance"

    target: str
    labels: list
    counts: list
    frequencies: list
    by: str | None = None
    by_labels: list = field(default_factory=list)
    crosstab: list = field(default_factory=list)  # (len(by_labels), len(labels))


@dataclass(frozen=True)
class FeatureSelectionResult(Result):
    type_name: ClassVar[str] = "feature_selection"

    target: str
    features: list  # ranked
    scores: list
    selected: list


@dataclass(frozen=True)
class CounterfactualResult(Result):
    type_name: ClassVar[str] = "counterfactual"

    explainer: str
    found: bool
    original: dict
    original_class: str
    target_class: str | None
    examples: list  # [{"values", "changes", "predicted_class", "probability", "distance", "valid"}]
    best_probability: float | None = None
    trace: list = field(default_factory=list)


@dataclass(frozen=True)
class TimeseriesAttribution(Result):
    type_name: ClassVar[str] = "timeseries_attribution"

    explainer: str
    name: str
    timestamps: list
    values: list
    segments: list  # [start, stop) index pairs
    scores: list
    reference: list
    base_value: float
    score: float
    exact: bool = True

    def point_scores(self) -> list[float]:
        """Segment scores spread evenly over the segment's points (for plotting)."""
        out = [0.0] * len(self.values)
        for (a, b), s in zip(self.segments, self.scores):
            for i in range(a, b):
                out[i] = s / (b - a)
        return out


@dataclass(frozen=True)
class TimeseriesCF(Result):
    type_name: ClassVar[str] = "timeseries_counterfactual"

    explainer: str
    name: str
    timestamps: list
    original: list
    modified: list
    modified_indices: list
    score_before: float
    score_after: float
    valid: bool
    found: bool


@dataclass(frozen=True)
class ErrorRecord(Result):
    type_name: ClassVar[str] = "error"

    explainer: str
    error_type: str
    message: str
    instance: int | None = None
