import json

import numpy as np
import pytest

from xaiengine.data import batch_from_array, make_tabular, read_csv
from xaiengine.fixtures import SCHEMA, fixture_path


@pytest.fixture(scope="session")
def income():
    return read_csv(fixture_path("income.csv"), SCHEMA)


@pytest.fixture(scope="session")
def income_paths(tmp_path_factory):
    d = tmp_path_factory.mktemp("income")
    data = d / "income.csv"
    data.write_text(fixture_path("income.csv").read_text("utf-8"))
    schema = d / "income.schema.json"
    schema.write_text(json.dumps(SCHEMA))
    lines = data.read_text().splitlines()
    inst = d / "instances.csv"
    inst.write_text("\n".join(lines[:4]) + "\n")
    return {"dir": d, "data": str(data), "schema": str(schema), "instances": str(inst)}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def array_batch(x, names=None):
    return batch_from_array(np.asarray(x, dtype=float), names)


@pytest.fixture
def small_batch():
    from xaiengine.data import TabularSchema
    schema = TabularSchema((("a", "continuous"), ("c", "categorical")), None, {"c": ("x", "y")})
    return make_tabular(schema, [["1.5", "x"], ["2", "y"], ["n/a", "x"]])


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(RESULTS):
        status, title, secs = RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}  {title} ({secs:.2f}s)")
