"""Fit/transform/inverse pipeline mapping a TabularBatch to a numeric matrix.

Only the schema's feature columns (everything but the target) are
encoded. Each source column owns a contiguous block of output columns;
``FittedTransform.groups`` exposes those blocks so explainers can reason
in source-feature space while models consume the encoded matrix.

Standardization uses the population standard deviation (``ddof=0``).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .data import CATEGORICAL, CONTINUOUS, TabularBatch, TabularSchema, make_tabular
from .errors import SchemaError

logger = logging.getLogger(__name__)

CATEGORICAL_ENCODINGS = ("one-hot", "ordinal")
CONTINUOUS_ENCODINGS = ("identity", "standardize", "min-max", "kbins")
NAN_FILLS = ("mean", "median", "constant")


@dataclass(frozen=True)
class ColumnDirective:
    encoding: str
    nan_fill: str = "mean"
    fill_value: object = None
    n_bins: int | None = None

    def to_dict(self) -> dict:
        out = {"encoding": self.encoding, "nan_fill": self.nan_fill}
        if self.nan_fill == "constant":
            out["fill_value"] = self.fill_value
        if self.encoding == "kbins":
            out["n_bins"] = self.n_bins
        return out

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ColumnDirective":
        return cls(doc["encoding"], doc.get("nan_fill", "mean"), doc.get("fill_value"), doc.get("n_bins"))


@dataclass(frozen=True)
class TransformSpec:
    directives: Mapping[str, ColumnDirective]

    @classmethod
    def default(cls, schema: TabularSchema, continuous: str = "standardize",
                categorical: str = "one-hot", n_bins: int = 5, overrides: Mapping | None = None) -> "TransformSpec":
        overrides = dict(overrides or {})
        directives = {}
        for name in schema.feature_names:
            if name in overrides:
                d = overrides.pop(name)
                directives[name] = d if isinstance(d, ColumnDirective) else ColumnDirective.from_dict(d)
            elif schema.kind(name) == CONTINUOUS:
                directives[name] = ColumnDirective(continuous, "mean", n_bins=n_bins if continuous == "kbins" else None)
            else:
                directives[name] = ColumnDirective(categorical, "mean")
        if overrides:
            raise SchemaError(f"transform directives for unknown columns: {sorted(overrides)}")
        return cls(directives)

    @classmethod
    def from_config(cls, schema: TabularSchema, doc: Mapping | None) -> "TransformSpec":
        """Build from a CLI config block ``{"continuous", "categorical", "columns"}``."""
        doc = doc or {}
        return cls.default(schema, doc.get("continuous", "standardize"), doc.get("categorical", "one-hot"),
                           doc.get("n_bins", 5), doc.get("columns"))

    def to_dict(self) -> dict:
        return {n: d.to_dict() for n, d in self.directives.items()}

    def validate(self, schema: TabularSchema) -> None:
        features = schema.feature_names
        if set(self.directives) != set(features):
            raise SchemaError(
                f"transform spec columns {sorted(self.directives)} do not match features {sorted(features)}")
        for name, d in self.directives.items():
            allowed = CONTINUOUS_ENCODINGS if schema.kind(name) == CONTINUOUS else CATEGORICAL_ENCODINGS
            if d.encoding not in allowed:
                raise SchemaError(f"column {name!r}: encoding {d.encoding!r} not in {allowed}")
            if d.nan_fill not in NAN_FILLS:
                raise SchemaError(f"column {name!r}: unknown nan_fill {d.nan_fill!r}")
            if d.encoding == "kbins" and (d.n_bins is None or d.n_bins < 2):
                raise SchemaError(f"column {name!r}: kbins needs n_bins >= 2")


def quantile_edges(values: np.ndarray, n_bins: int) -> np.ndarray:
    """Equal-frequency bin edges, deduplicated (strictly increasing)."""
    values = np.asarray(values, dtype=float)
    values = values[~np.isnan(values)]
    edges = np.quantile(values, np.linspace(0.0, 1.0, n_bins + 1))
    return np.unique(edges)


def digitize(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    """Bin index for each value; bin i is ``[edges[i], edges[i+1])``, outer bins open-ended."""
    if len(edges) <= 2:
        return np.zeros(len(values), dtype=int)
    return np.searchsorted(edges[1:-1], values, side="right")


@dataclass(frozen=True)
class ColumnStats:
    name: str
    kind: str
    encoding: str
    fill: object
    mean: float = 0.0
    std: float = 1.0
    min: float = 0.0
    max: float = 0.0
    edges: tuple = ()
    categories: tuple = ()
    zero_variance: bool = False

    @property
    def width(self) -> int:
        return len(self.categories) if self.encoding == "one-hot" else 1

    def to_dict(self) -> dict:
        return {"name": self.name, "kind": self.kind, "encoding": self.encoding, "fill": self.fill,
                "mean": self.mean, "std": self.std, "min": self.min, "max": self.max,
                "edges": list(self.edges), "categories": list(self.categories),
                "zero_variance": self.zero_variance}


class FittedTransform:
    """Immutable fitted encoder for a fixed set of source feature columns."""

    def __init__(self, spec: TransformSpec, schema: TabularSchema, stats: Sequence[ColumnStats]):
        self.spec = spec
        self.schema = schema
        self.stats = tuple(stats)
        self._by_name = {s.name: s for s in self.stats}
        layout, groups, start = [], [], 0
        for s in self.stats:
            if s.encoding == "one-hot":
                layout.extend((s.name, c) for c in s.categories)
            else:
                layout.append((s.name, s.encoding))
            groups.append(np.arange(start, start + s.width))
            start += s.width
        self.layout = tuple(layout)
        self.groups = tuple(groups)

    @property
    def feature_names(self) -> list[str]:
        return [s.name for s in self.stats]

    @property
    def width(self) -> int:
        return len(self.layout)

    @property
    def warnings(self) -> list[str]:
        return [f"{s.name}: zero variance, scaling disabled" for s in self.stats if s.zero_variance]

    def column_stats(self, name: str) -> ColumnStats:
        try:
            return self._by_name[name]
        except KeyError:
            raise SchemaError(f"transform has no column {name!r}") from None

    def fill_column(self, name: str, values) -> np.ndarray:
        s = self.column_stats(name)
        if s.kind == CONTINUOUS:
            out = np.asarray(values, dtype=float).copy()
            out[np.isnan(out)] = s.fill
            return out
        out = np.empty(len(values), dtype=object)
        out[:] = [s.fill if v is None else v for v in values]
        return out

    def transform_column(self, name: str, values) -> np.ndarray:
        """Encode raw cells of one source column into its ``(n, width)`` block."""
        s = self.column_stats(name)
        vals = self.fill_column(name, values)
        n = len(vals)
        if s.kind == CATEGORICAL:
            index = {c: i for i, c in enumerate(s.categories)}
            codes = np.array([index.get(v, -1) for v in vals], dtype=int)
            if s.encoding == "ordinal":
                return codes.astype(float).reshape(n, 1)
            block = np.zeros((n, s.width))
            seen = codes >= 0
            block[np.nonzero(seen)[0], codes[seen]] = 1.0
            return block
        if s.encoding == "identity" or s.zero_variance:
            out = vals
        elif s.encoding == "standardize":
            out = (vals - s.mean) / s.std
        elif s.encoding == "min-max":
            out = (vals - s.min) / (s.max - s.min)
        else:
            out = digitize(vals, np.asarray(s.edges)).astype(float)
        return out.reshape(n, 1)

    def transform(self, batch: TabularBatch) -> np.ndarray:
        self._check(batch.schema)
        if batch.n_rows == 0:
            return np.zeros((0, self.width))
        return np.hstack([self.transform_column(s.name, batch.column(s.name)) for s in self.stats])

    def inverse_column(self, name: str, block: np.ndarray) -> list:
        s = self.column_stats(name)
        block = np.asarray(block, dtype=float).reshape(len(block), -1)
        if s.kind == CATEGORICAL:
            if s.encoding == "one-hot":
                codes = np.argmax(block, axis=1)
            else:
                codes = np.clip(np.rint(block[:, 0]), 0, len(s.categories) - 1).astype(int)
            return [s.categories[c] for c in codes]
        col = block[:, 0]
        if s.encoding == "identity" or s.zero_variance:
            out = col
        elif s.encoding == "standardize":
            out = col * s.std + s.mean
        elif s.encoding == "min-max":
            out = col * (s.max - s.min) + s.min
        else:
            edges = np.asarray(s.edges)
            centers = (edges[:-1] + edges[1:]) / 2.0
            idx = np.clip(np.rint(col), 0, len(centers) - 1).astype(int)
            out = centers[idx]
        return [float(v) for v in out]

    def inverse_transform(self, matrix) -> TabularBatch:
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
        if matrix.shape[1] != self.width:
            raise SchemaError(f"matrix has {matrix.shape[1]} columns, transform layout has {self.width}")
        cols = [self.inverse_column(s.name, matrix[:, g]) for s, g in zip(self.stats, self.groups)]
        rows = [list(r) for r in zip(*cols)] if cols else []
        return make_tabular(self.schema, rows)

    def slope(self, name: str) -> float | None:
        """d(encoded)/d(raw) for affine continuous encodings, else ``None``."""
        s = self.column_stats(name)
        if s.kind != CONTINUOUS or s.encoding == "kbins":
            return None
        if s.encoding == "identity" or s.zero_variance:
            return 1.0
        if s.encoding == "standardize":
            return 1.0 / s.std
        return 1.0 / (s.max - s.min)

    def _check(self, schema: TabularSchema) -> None:
        for s in self.stats:
            if schema.kind(s.name) != s.kind:
                raise SchemaError(f"column {s.name!r} is {schema.kind(s.name)}, transform expects {s.kind}")

    def to_dict(self) -> dict:
        return {"spec": self.spec.to_dict(), "schema": self.schema.to_dict(),
                "stats": [s.to_dict() for s in self.stats]}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "FittedTransform":
        spec = TransformSpec({n: ColumnDirective.from_dict(d) for n, d in doc["spec"].items()})
        stats = []
        for d in doc["stats"]:
            d = dict(d)
            d["edges"] = tuple(d.get("edges", ()))
            d["categories"] = tuple(d.get("categories", ()))
            stats.append(ColumnStats(**d))
        return cls(spec, TabularSchema.from_dict(doc["schema"]), stats)


def _fit_column(name: str, kind: str, d: ColumnDirective, values: np.ndarray, categories) -> ColumnStats:
    if kind == CATEGORICAL:
        present = [v for v in values if v is not None]
        if d.nan_fill == "constant":
            fill = str(d.fill_value)
        elif present:
            labels, counts = np.unique(np.array(present, dtype=object), return_counts=True)
            best = max(counts)
            # ties resolved by category order
            tied = {labels[i] for i in range(len(labels)) if counts[i] == best}
            fill = next(c for c in categories if c in tied)
        else:
            fill = categories[0]
        cats = tuple(categories) + ((fill,) if fill not in categories else ())
        return ColumnStats(name, kind, d.encoding, fill, categories=cats)

    present = values[~np.isnan(values)]
    if d.nan_fill == "constant":
        fill = float(d.fill_value)
    elif present.size == 0:
        raise SchemaError(f"column {name!r} is entirely missing; cannot compute {d.nan_fill} fill")
    else:
        fill = float(np.mean(present) if d.nan_fill == "mean" else np.median(present))
    filled = np.where(np.isnan(values), fill, values)
    mean, std = float(np.mean(filled)), float(np.std(filled))
    lo, hi = float(np.min(filled)), float(np.max(filled))
    zero_var = False
    if d.encoding == "standardize" and std <= 0.0:
        zero_var = True
    if d.encoding == "min-max" and hi <= lo:
        zero_var = True
    edges = ()
    if d.encoding == "kbins":
        edges = tuple(float(e) for e in quantile_edges(filled, d.n_bins))
        if len(edges) < 2:
            edges = (lo, lo + 1.0)
    if zero_var:
        logger.warning("column %r has zero variance; %s falls back to identity", name, d.encoding)
    return ColumnStats(name, kind, d.encoding, fill, mean, std if std > 0 else 1.0, lo, hi, edges,
                       zero_variance=zero_var)


def fit_transform_spec(spec: TransformSpec, train: TabularBatch) -> FittedTransform:
    if train.n_rows == 0:
        raise SchemaError("cannot fit a transform on an empty batch")
    spec.validate(train.schema)
    stats = []
    for name in train.schema.feature_names:
        kind = train.schema.kind(name)
        stats.append(_fit_column(name, kind, spec.directives[name], train.column(name),
                                 train.schema.categories.get(name, ())))
    schema = train.schema.select(train.schema.feature_names)
    return FittedTransform(spec, schema, stats)


def transform(ft: FittedTransform, batch: TabularBatch) -> np.ndarray:
    return ft.transform(batch)


def inverse_transform(ft: FittedTransform, matrix) -> TabularBatch:
    return ft.inverse_transform(matrix)


def identity_transform(schema: TabularSchema) -> FittedTransform:
    """Pass-through transform for all-continuous schemas (no fitting needed)."""
    stats = []
    for name in schema.feature_names:
        if schema.kind(name) != CONTINUOUS:
            raise SchemaError(f"identity transform needs continuous features; {name!r} is categorical")
        stats.append(ColumnStats(name, CONTINUOUS, "identity", 0.0))
    spec = TransformSpec({n: ColumnDirective("identity") for n in schema.feature_names})
    return FittedTransform(spec, schema.select(schema.feature_names), stats)
