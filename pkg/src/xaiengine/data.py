"""Typed containers for tabular data and univariate time series.

Batches are column-oriented internally (one numpy array per column) but
keep the row-major view available through :meth:`TabularBatch.rows`.
Continuous missing cells are stored as ``nan`` and categorical missing
cells as ``None``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import SchemaError

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"
MISSING_MARKERS = ("", "n/a")


def is_missing(cell) -> bool:
    if cell is None:
        return True
    if isinstance(cell, str):
        return cell.strip().lower() in MISSING_MARKERS
    if isinstance(cell, float):
        return math.isnan(cell)
    return False


def _parse_real(cell):
    if isinstance(cell, (int, float, np.integer, np.floating)) and not isinstance(cell, bool):
        return float(cell)
    try:
        return float(str(cell).strip())
    except ValueError:
        return None


@dataclass(frozen=True)
class TabularSchema:
    columns: tuple[tuple[str, str], ...]
    target: str | None = None
    categories: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        cols = tuple((str(n), str(k)) for n, k in self.columns)
        object.__setattr__(self, "columns", cols)
        names = [n for n, _ in cols]
        if any(not n for n in names):
            raise SchemaError("column names must be non-empty")
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise SchemaError(f"duplicate column names: {dupes}")
        for name, kind in cols:
            if kind not in (CONTINUOUS, CATEGORICAL):
                raise SchemaError(f"column {name!r}: unknown kind {kind!r}")
        if self.target is not None and self.target not in names:
            raise SchemaError(f"target {self.target!r} is not a column")
        cats = {}
        for name, kind in cols:
            if kind != CATEGORICAL:
                continue
            labels = tuple(str(c) for c in self.categories.get(name, ()))
            if not labels:
                raise SchemaError(f"categorical column {name!r} has no categories")
            if len(set(labels)) != len(labels):
                raise SchemaError(f"categorical column {name!r} has duplicate categories")
            cats[name] = labels
        extra = set(self.categories) - set(cats)
        if extra:
            raise SchemaError(f"categories given for non-categorical columns: {sorted(extra)}")
        object.__setattr__(self, "categories", cats)

    @property
    def names(self) -> list[str]:
        return [n for n, _ in self.columns]

    @property
    def feature_names(self) -> list[str]:
        return [n for n, _ in self.columns if n != self.target]

    def kind(self, name: str) -> str:
        for n, k in self.columns:
            if n == name:
                return k
        raise SchemaError(f"unknown column {name!r}")

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise SchemaError(f"unknown column {name!r}") from None

    def select(self, names: Sequence[str], target: str | None = None) -> "TabularSchema":
        cols = tuple((n, self.kind(n)) for n in names)
        cats = {n: self.categories[n] for n, k in cols if k == CATEGORICAL}
        return TabularSchema(cols, target if target in names else None, cats)

    def to_dict(self) -> dict:
        out = {
            "columns": [
                {"name": n, "kind": k, **({"categories": list(self.categories[n])} if k == CATEGORICAL else {})}
                for n, k in self.columns
            ],
            "target": self.target,
        }
        return out

    @classmethod
    def from_dict(cls, doc: Mapping) -> "TabularSchema":
        try:
            cols = tuple((c["name"], c["kind"]) for c in doc["columns"])
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"malformed schema document: {exc}") from None
        cats = {c["name"]: tuple(c.get("categories", ())) for c in doc["columns"] if c["kind"] == CATEGORICAL}
        return cls(cols, doc.get("target"), cats)


def infer_schema(header: Sequence[str], rows: Sequence[Sequence], target: str | None = None) -> TabularSchema:
    """Infer column kinds from a sample of raw text rows.

    A column is continuous iff every non-missing cell parses as a real;
    otherwise it is categorical with categories in first-seen order.
    """
    if not header:
        raise SchemaError("header is empty")
    if not rows:
        raise SchemaError("no sample rows to infer from")
    header = [str(h) for h in header]
    if len(set(header)) != len(header):
        raise SchemaError(f"duplicate header names in {header}")
    if target is not None and target not in header:
        raise SchemaError(f"target {target!r} not in header")
    cols, cats = [], {}
    for j, name in enumerate(header):
        cells = [r[j] for r in rows if not is_missing(r[j])]
        parsed = [_parse_real(c) for c in cells]
        if all(p is not None and math.isfinite(p) for p in parsed):
            cols.append((name, CONTINUOUS))
        else:
            cols.append((name, CATEGORICAL))
            cats[name] = tuple(dict.fromkeys(_label(c) for c in cells))
    return TabularSchema(tuple(cols), target, cats)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


class TabularBatch:
    """Validated, immutable table of rows under a :class:`TabularSchema`."""

    __slots__ = ("schema", "_cols", "n_rows")

    def __init__(self, schema: TabularSchema, columns: Mapping[str, np.ndarray], n_rows: int):
        self.schema = schema
        self._cols = dict(columns)
        self.n_rows = n_rows

    def column(self, name: str) -> np.ndarray:
        if name not in self._cols:
            raise SchemaError(f"unknown column {name!r}")
        return self._cols[name]

    def rows(self) -> list[list]:
        names = self.schema.names
        return [[_cell_out(self._cols[n][i]) for n in names] for i in range(self.n_rows)]

    def row(self, i: int) -> dict:
        return {n: _cell_out(self._cols[n][i]) for n in self.schema.names}

    def take(self, index) -> "TabularBatch":
        index = np.asarray(index, dtype=int).reshape(-1)
        cols = {n: _freeze(c[index].copy()) for n, c in self._cols.items()}
        return TabularBatch(self.schema, cols, len(index))

    def select(self, names: Sequence[str]) -> "TabularBatch":
        schema = self.schema.select(names, self.schema.target)
        return TabularBatch(schema, {n: self._cols[n] for n in names}, self.n_rows)

    def with_column(self, name: str, values) -> "TabularBatch":
        """Return a copy with one column replaced (values must already be valid)."""
        kind = self.schema.kind(name)
        if kind == CONTINUOUS:
            arr = np.asarray(values, dtype=float).copy()
        else:
            arr = np.empty(self.n_rows, dtype=object)
            arr[:] = list(values)
        cols = dict(self._cols)
        cols[name] = _freeze(arr)
        return TabularBatch(self.schema, cols, self.n_rows)

    def to_dict(self) -> dict:
        return {"schema": self.schema.to_dict(), "rows": self.rows()}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "TabularBatch":
        return make_tabular(TabularSchema.from_dict(doc["schema"]), doc["rows"])

    def __len__(self):
        return self.n_rows

    def __eq__(self, other):
        if not isinstance(other, TabularBatch):
            return NotImplemented
        if self.schema != other.schema or self.n_rows != other.n_rows:
            return False
        for name, kind in self.schema.columns:
            a, b = self._cols[name], other._cols[name]
            if kind == CONTINUOUS:
                if not np.array_equal(a, b, equal_nan=True):
                    return False
            elif list(a) != list(b):
                return False
        return True

    def __repr__(self):
        return f"TabularBatch(n_rows={self.n_rows}, columns={self.schema.names})"


def _cell_out(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if math.isnan(v) else v
    return v


def make_tabular(schema: TabularSchema, rows: Iterable[Sequence]) -> TabularBatch:
    """Validate raw cells against ``schema`` and build a batch.

    Categorical labels missing from the schema are appended to its
    category list (first-seen order); the returned batch carries the
    extended schema.
    """
    rows = [list(r) for r in rows]
    width = len(schema.columns)
    for i, r in enumerate(rows):
        if len(r) != width:
            raise SchemaError(f"row {i} has {len(r)} cells, expected {width}")
    cats = {n: list(v) for n, v in schema.categories.items()}
    cols = {}
    for j, (name, kind) in enumerate(schema.columns):
        if kind == CONTINUOUS:
            arr = np.empty(len(rows), dtype=float)
            for i, r in enumerate(rows):
                cell = r[j]
                if is_missing(cell):
                    arr[i] = np.nan
                    continue
                val = _parse_real(cell)
                if val is None or not math.isfinite(val):
                    raise SchemaError(f"row {i}, column {name!r}: {cell!r} is not a finite real")
                arr[i] = val
        else:
            arr = np.empty(len(rows), dtype=object)
            known = cats[name]
            seen = set(known)
            for i, r in enumerate(rows):
                cell = r[j]
                if is_missing(cell):
                    arr[i] = None
                    continue
                label = _label(cell)
                if label not in seen:
                    known.append(label)
                    seen.add(label)
                arr[i] = label
        cols[name] = _freeze(arr)
    if any(not v for v in cats.values()):
        empty = [n for n, v in cats.items() if not v]
        raise SchemaError(f"categorical columns without any category: {empty}")
    new_schema = TabularSchema(schema.columns, schema.target, {n: tuple(v) for n, v in cats.items()})
    return TabularBatch(new_schema, cols, len(rows))


def _label(cell) -> str:
    if isinstance(cell, float) and cell.is_integer():
        return str(int(cell))
    return str(cell).strip()


def batch_from_array(x, names: Sequence[str] | None = None) -> TabularBatch:
    """Wrap a numeric matrix as an all-continuous batch."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    names = list(names) if names is not None else [f"x{j}" for j in range(x.shape[1])]
    schema = TabularSchema(tuple((n, CONTINUOUS) for n in names))
    if not np.all(np.isfinite(x)):
        raise SchemaError("non-finite value in numeric matrix")
    cols = {n: _freeze(x[:, j].astype(float).copy()) for j, n in enumerate(names)}
    return TabularBatch(schema, cols, x.shape[0])


def concat(batches: Sequence[TabularBatch]) -> TabularBatch:
    first = batches[0]
    rows = [r for b in batches for r in b.rows()]
    return make_tabular(first.schema, rows)


# -- CSV ---------------------------------------------------------------------


def read_csv(path, schema=None, target: str | None = None) -> TabularBatch:
    """Read an RFC-4180 CSV file.

    ``schema`` may be a :class:`TabularSchema`, a sidecar schema mapping
    (``{"columns": [{"name", "kind"}], "target"}``, categories optional) or
    ``None`` to infer kinds from the data. A schema's target column may be
    absent from the file (e.g. instances to explain).
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: CSV input is empty") from None
        rows = [r for r in reader if r]
    for i, r in enumerate(rows):
        if len(r) != len(header):
            raise SchemaError(f"{path}: row {i + 1} has {len(r)} cells, expected {len(header)}")
    if schema is None:
        return make_tabular(infer_schema(header, rows or [[""] * len(header)], target), rows)
    if isinstance(schema, Mapping):
        schema = _schema_from_sidecar(schema, header, rows)
    names = schema.names
    missing = [n for n in names if n not in header]
    if missing and missing != [schema.target]:
        raise SchemaError(f"{path}: CSV lacks schema columns {missing}")
    if missing:
        names = [n for n in names if n in header]
        schema = schema.select(names)
    order = [header.index(n) for n in names]
    return make_tabular(schema, [[r[k] for k in order] for r in rows])


def _schema_from_sidecar(doc: Mapping, header, rows) -> TabularSchema:
    try:
        cols = [(c["name"], c["kind"]) for c in doc["columns"]]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed schema document: missing {exc}") from None
    cats = {}
    for c in doc["columns"]:
        if c["kind"] != CATEGORICAL:
            continue
        labels = list(c.get("categories", ()))
        if c["name"] in header:
            j = header.index(c["name"])
            for r in rows:
                if not is_missing(r[j]) and _label(r[j]) not in labels:
                    labels.append(_label(r[j]))
        cats[c["name"]] = tuple(labels)
    target = doc.get("target")
    if target is not None and target not in header and not cats.get(target, True):
        # unlabeled rows: the target column is absent and nothing is known about its classes
        cols = [c for c in cols if c[0] != target]
        cats.pop(target)
        target = None
    return TabularSchema(tuple(cols), target, cats)


def write_csv(batch: TabularBatch) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(batch.schema.names)
    for r in batch.rows():
        writer.writerow(["" if c is None else (repr(c) if isinstance(c, float) else c) for c in r])
    return buf.getvalue()


# -- time series -------------------------------------------------------------


class TimeseriesWindow:
    """Univariate series: strictly increasing integer timestamps, finite values."""

    __slots__ = ("timestamps", "values", "name")

    def __init__(self, timestamps, values, name: str = "metric"):
        ts = np.asarray(timestamps)
        vals = np.asarray(values, dtype=float)
        if ts.ndim != 1 or vals.ndim != 1:
            raise SchemaError("timestamps and values must be one-dimensional")
        if len(ts) != len(vals):
            raise SchemaError(f"length mismatch: {len(ts)} timestamps, {len(vals)} values")
        if len(ts) < 1:
            raise SchemaError("a window needs at least one point")
        if not np.all(np.isfinite(vals)):
            raise SchemaError("window values must be finite")
        if ts.dtype.kind == "f":
            if not np.all(np.isfinite(ts)) or not np.all(ts == np.round(ts)):
                raise SchemaError("timestamps must be integers")
        ts = ts.astype(np.int64)
        if np.any(np.diff(ts) <= 0):
            raise SchemaError("timestamps must be strictly increasing")
        self.timestamps = _freeze(ts)
        self.values = _freeze(vals.copy())
        self.name = str(name)

    def __len__(self):
        return len(self.values)

    def replace_values(self, values) -> "TimeseriesWindow":
        return TimeseriesWindow(self.timestamps, values, self.name)

    def to_dict(self) -> dict:
        return {"name": self.name, "timestamps": [int(t) for t in self.timestamps],
                "values": [float(v) for v in self.values]}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "TimeseriesWindow":
        return cls(doc["timestamps"], doc["values"], doc.get("name", "metric"))

    def __eq__(self, other):
        if not isinstance(other, TimeseriesWindow):
            return NotImplemented
        return (self.name == other.name and np.array_equal(self.timestamps, other.timestamps)
                and np.array_equal(self.values, other.values))

    def __repr__(self):
        return f"TimeseriesWindow(name={self.name!r}, length={len(self)})"


def make_timeseries(timestamps, values, name: str = "metric") -> TimeseriesWindow:
    return TimeseriesWindow(timestamps, values, name)


def read_series_csv(path, name: str | None = None) -> TimeseriesWindow:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or len(header) != 2:
            raise SchemaError("series CSV must have exactly two columns: timestamp,value")
        ts, vals = [], []
        for i, r in enumerate(reader):
            if not r:
                continue
            try:
                ts.append(int(r[0]))
                vals.append(float(r[1]))
            except (ValueError, IndexError):
                raise SchemaError(f"series CSV row {i + 1} is malformed: {r}") from None
    return TimeseriesWindow(ts, vals, name or header[1])
