"""Bundled synthetic income data.

``income.csv`` is produced by :func:`generate_income` with seed 0 and 500
rows. The label is ``>50K`` exactly when ``capital_gain`` exceeds 5000, so
explanations on it have a known right answer.
"""

from __future__ import annotations

import csv
import io
from importlib import resources

import numpy as np

GAIN_THRESHOLD = 5000
EDUCATION = ("HS-grad", "Some-college", "Bachelors", "Masters", "Doctorate")
MARITAL = ("Never-married", "Married", "Divorced", "Widowed")
SCHEMA = {
    "columns": [
        {"name": "age", "kind": "continuous"},
        {"name": "education", "kind": "categorical"},
        {"name": "hours_per_week", "kind": "continuous"},
        {"name": "capital_gain", "kind": "continuous"},
        {"name": "capital_loss", "kind": "continuous"},
        {"name": "marital_status", "kind": "categorical"},
        {"name": "income", "kind": "categorical"},
    ],
    "target": "income",
}


def generate_income(n: int = 500, seed: int = 0) -> str:
    """CSV text for ``n`` synthetic rows."""
    rng = np.random.default_rng(seed)
    age = rng.integers(18, 76, n)
    edu = rng.choice(len(EDUCATION), n, p=[0.35, 0.25, 0.22, 0.13, 0.05])
    hours = np.clip(np.round(rng.normal(40, 10, n)), 5, 90).astype(int)
    kind = rng.random(n)
    gain = np.where(kind < 0.6, 0,
                    np.where(kind < 0.8, rng.integers(100, 5000, n), rng.integers(5001, 30000, n)))
    loss = np.where(rng.random(n) < 0.1, rng.integers(100, 2500, n), 0)
    marital = rng.choice(len(MARITAL), n, p=[0.35, 0.45, 0.15, 0.05])
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow([c["name"] for c in SCHEMA["columns"]])
    for i in range(n):
        label = ">50K" if gain[i] > GAIN_THRESHOLD else "<=50K"
        w.writerow([int(age[i]), EDUCATION[edu[i]], int(hours[i]), int(gain[i]), int(loss[i]),
                    MARITAL[marital[i]], label])
    return out.getvalue()


def fixture_path(name: str = "income.csv"):
    """Filesystem path of a bundled fixture file."""
    return resources.files(__name__).joinpath(name)
