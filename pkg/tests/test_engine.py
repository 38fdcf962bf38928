import numpy as np
import pytest

from xaiengine import engine
from xaiengine.data import batch_from_array, make_timeseries
from xaiengine.engine import (DATA, GLOBAL, LOCAL, REGISTRY, ExplainerEntry, ExplanationBundle, build_set,
                              explain, explain_global, explain_local, resolve)
from xaiengine.errors import CapabilityError, UnknownExplainerError
from xaiengine.models import LinearModel, fit_detector, random_mlp
from xaiengine.models.base import function_model
from xaiengine.results import ErrorRecord, FeatureAttribution, PDPResult

KEYS = ["correlation", "imbalance", "feature-selection", "pdp", "ale", "morris", "lime", "shap", "ig", "ce",
        "mace-greedy", "glass-linear", "glass-tree", "ts-shap", "ts-ce"]


def test_registry_keys_in_order():
    assert list(REGISTRY) == KEYS


def test_resolve_scopes():
    assert resolve(["pdp"])[0].scope == GLOBAL
    assert resolve(["shap"])[0].scope == LOCAL
    assert resolve(["correlation"])[0].scope == DATA


def test_resolve_unknown_lists_valid_keys():
    with pytest.raises(UnknownExplainerError) as err:
        resolve(["gradcam"])
    assert "gradcam" in str(err.value)
    for k in KEYS:
        assert k in str(err.value)


def test_capability_checked_at_resolve():
    h = function_model(lambda x: x[:, 0])
    with pytest.raises(CapabilityError, match="differentiable"):
        resolve(["shap", "ig"], h)
    with pytest.raises(CapabilityError):
        resolve(["ts-shap"], h)
    with pytest.raises(CapabilityError):
        resolve(["lime"], None)
    assert resolve(["correlation"], None)


def lin(d=3):
    return LinearModel(np.arange(1.0, d + 1).reshape(-1, 1) * [[1.0, -1.0]], np.zeros(2), logistic=True
                       ).handle(["a", "b"])


def test_local_shape(rng):
    train = batch_from_array(rng.normal(size=(30, 3)))
    xset = build_set(["shap", "lime"], lin(), None, train, params={"lime": {"n_samples": 300}}, seed=1)
    b = explain_local(xset, train.take([0, 1]))
    assert list(b.local) == ["lime", "shap"]
    assert all(len(v) == 2 for v in b.local.values())
    assert all(isinstance(r, FeatureAttribution) for v in b.local.values() for r in v)
    assert b.global_ == {}
    assert len(b.instances) == 2 and b.instances[0]["x0"] == train.column("x0")[0]


def test_global_only_set_has_empty_local(rng):
    train = batch_from_array(rng.normal(size=(10, 2)))
    xset = build_set(["pdp"], lin(2), None, train)
    assert explain_local(xset, train.take([0])).local == {}


def test_fault_isolation(rng, monkeypatch):
    calls = {"n": 0}

    def flaky(xset, inst, opts):
        calls["n"] += 1
        if calls["n"] == 2:
            raise RuntimeError("boom")
        return "ok-result"

    entry = ExplainerEntry("flaky", LOCAL, engine.BLACK_BOX, flaky)
    monkeypatch.setitem(REGISTRY, "flaky", entry)
    train = batch_from_array(rng.normal(size=(5, 2)))
    xset = build_set(["flaky", "glass-linear"], lin(2), None, train)
    b = explain_local(xset, train.take([0, 1]))
    assert b.local["flaky"][0] == "ok-result"
    err = b.local["flaky"][1]
    assert isinstance(err, ErrorRecord) and err.instance == 1 and err.message == "boom"
    assert len(b.local["glass-linear"]) == 2


def test_pdp_feature_list(rng):
    train = batch_from_array(rng.normal(size=(20, 3)), ["age", "b", "c"])
    xset = build_set(["pdp"], lin(), None, train)
    b = explain_global(xset, {"pdp": {"features": ["age"], "grid_size": 5}})
    assert len(b.global_["pdp"]) == 1
    assert isinstance(b.global_["pdp"][0], PDPResult) and b.global_["pdp"][0].feature == "age"


def test_model_less_data_scope(income):
    xset = build_set(["correlation", "imbalance"], None, None, income)
    b = explain_global(xset)
    assert set(b.global_) == {"correlation", "imbalance"}


def test_empty_set():
    b = explain(build_set([], None))
    assert b.local == {} and b.global_ == {}
    assert b.meta["explainers"] == [] and "seed" in b.meta and "version" in b.meta


def test_scope_dispatch_total(rng, income):
    """Every registry entry runs in exactly one of the two dispatchers."""
    x = rng.normal(size=(30, 3))
    train = batch_from_array(x)
    tab = [k for k in KEYS if not k.startswith("ts-") and k not in ("glass-tree",)]
    from xaiengine.models import train_builtin
    tree = train_builtin("tree", x, ["a" if v > 0 else "b" for v in x[:, 0]])
    seen_local, seen_global = set(), set()
    for names, model, data in (
        ([k for k in tab if k not in ("correlation", "imbalance", "feature-selection")], lin(), train),
        (["glass-tree"], tree, train),
        (["correlation", "imbalance", "feature-selection"], None, income),
    ):
        xset = build_set(names, model, None, data, params={"lime": {"n_samples": 200}, "morris": {"r": 2}})
        inst = data.take([0])
        loc, glo = explain_local(xset, inst), explain_global(xset)
        seen_local |= set(loc.local)
        seen_global |= set(glo.global_)
    det = fit_detector(make_timeseries(range(50), rng.normal(size=50)))
    w = make_timeseries(range(16), np.r_[np.zeros(8), [9.0], np.zeros(7)])
    xset = build_set(["ts-shap", "ts-ce"], det)
    seen_local |= set(explain_local(xset, [w]).local)
    seen_global |= set(explain_global(xset).global_)
    assert seen_local | seen_global == set(KEYS)
    assert not seen_local & seen_global


def test_bundle_round_trip(rng):
    train = batch_from_array(rng.normal(size=(10, 2)))
    xset = build_set(["shap", "pdp"], lin(2), None, train)
    b = explain(xset, train.take([0]))
    again = ExplanationBundle.from_dict(b.to_dict())
    assert again.to_dict() == b.to_dict()


def test_postprocess_softmax(rng):
    raw = function_model(lambda x: np.column_stack([x[:, 0], -x[:, 0]]), 2, "classification", labels=["p", "q"])
    xset = build_set(["shap"], raw, None, batch_from_array(rng.normal(size=(5, 1))), postprocess="softmax")
    assert xset.model.postprocess == "softmax"
    p = xset.model.predict(np.array([[0.3]]))
    assert abs(p.sum() - 1) < 1e-12


def test_timeseries_instances_rejected_for_tabular(rng):
    det = fit_detector(make_timeseries(range(10), rng.normal(size=10)))
    xset = build_set(["ts-shap"], det)
    b = explain_local(xset, batch_from_array([[1.0]]))
    assert isinstance(b.local["ts-shap"][0], ErrorRecord)


def test_differentiable_mlp_ig(rng):
    m = random_mlp([3, 4, 2], seed=0, classification=True).handle(["a", "b"])
    train = batch_from_array(rng.normal(size=(10, 3)))
    b = explain_local(build_set(["ig"], m, None, train), train.take([0]))
    r = b.local["ig"][0]
    assert abs(r.base_value + sum(r.scores) - r.prediction) < 1e-4
