import numpy as np
import pytest

from xaiengine.data import make_timeseries
from xaiengine.errors import CapabilityError, ModelError
from xaiengine.models import (DIFFERENTIABLE, GLASS_LINEAR, GLASS_TREE, LinearModel, ThresholdDetector,
                              detect, fit_detector, load_model, random_mlp, save_model, train_builtin)
from xaiengine.models.base import function_model

from oracles import central_difference


def test_linear_recovers_weights(rng):
    x = rng.normal(size=(50, 2))
    y = 2 * x[:, 0] + 3 * x[:, 1] + 1
    h = train_builtin("linear", x, y)
    np.testing.assert_allclose(h.model.weights[:, 0], [2, 3], atol=1e-6)
    assert abs(h.model.bias[0] - 1) < 1e-6
    assert GLASS_LINEAR in h.capabilities and DIFFERENTIABLE in h.capabilities


def test_tree_learns_xor():
    x = np.array([[a, b] for a in (0, 1) for b in (0, 1)] * 5, dtype=float)
    y = [str(int(a) ^ int(b)) for a, b in x]
    h = train_builtin("tree", x, y)
    pred = np.array(h.labels)[h.predicted_class(x)]
    assert list(pred) == y
    assert h.model.depth() >= 2
    assert GLASS_TREE in h.capabilities


def test_single_class_constant_model():
    h = train_builtin("logistic", np.ones((4, 2)), ["yes"] * 4)
    assert h.labels == ("yes",)
    assert "degenerate-targets" in h.flags
    np.testing.assert_array_equal(h.predict(np.zeros((3, 2))), np.ones((3, 1)))


def test_linear_predict_dot_product():
    h = LinearModel(np.array([[2.0], [3.0]]), np.array([1.0])).handle()
    assert h.predict(np.array([[1.0, 1.0]]))[0, 0] == 6.0
    np.testing.assert_array_equal(h.gradient(np.array([5.0, -2.0]), 0), [2.0, 3.0])


def test_softmax_rows_sum_to_one(rng):
    x = rng.normal(size=(40, 3))
    h = train_builtin("logistic", x, ["a" if v > 0 else "b" for v in x[:, 0]])
    p = h.predict(rng.normal(size=(25, 3)) * 10)
    assert np.all(np.abs(p.sum(axis=1) - 1) <= 1e-9)
    assert np.all((p >= 0) & (p <= 1))


def test_empty_input():
    h = LinearModel(np.ones((2, 3)), np.zeros(3), logistic=True).handle(["a", "b", "c"])
    assert h.predict(np.zeros((0, 2))).shape == (0, 3)


def test_width_mismatch():
    h = LinearModel(np.ones((2, 1)), np.zeros(1)).handle()
    with pytest.raises(ModelError):
        h.predict(np.zeros((1, 3)))


def test_gradient_requires_differentiable():
    h = function_model(lambda x: x[:, 0])
    with pytest.raises(CapabilityError):
        h.gradient(np.zeros(2), 0)


def test_softmax_boundary_gradients_opposite():
    h = LinearModel(np.array([[1.0, -1.0], [0.5, 2.0]]), np.array([0.0, 0.0]), logistic=True).handle(["a", "b"])
    # logits equal where 2*x0 = 1.5*x1
    x = np.array([0.75, 1.0])
    np.testing.assert_allclose(h.predict(x[None])[0], [0.5, 0.5])
    np.testing.assert_allclose(h.gradient(x, 0), -h.gradient(x, 1), atol=1e-15)


def test_mlp_gradient_matches_finite_differences(rng):
    m = random_mlp([4, 8, 6, 3], seed=3, classification=True)
    h = m.handle(["a", "b", "c"])
    for _ in range(20):
        x = rng.normal(size=4)
        for k in range(3):
            fd = central_difference(lambda z: h.predict(z[None])[0, k], x)
            assert np.max(np.abs(h.gradient(x, k) - fd)) <= 1e-4


def test_batch_consistency_bitwise(rng):
    x = rng.normal(size=(30, 4))
    models = [random_mlp([4, 5, 2], seed=1).handle(),
              train_builtin("tree", x, rng.normal(size=30), {"task": "regression"}),
              train_builtin("logistic", x, ["p" if v > 0 else "q" for v in x[:, 1]])]
    for h in models:
        whole = h.predict(x)
        parts = np.vstack([h.predict(x[:7]), h.predict(x[7:19]), h.predict(x[19:])])
        assert np.array_equal(whole, parts)


def test_training_deterministic(rng):
    x = rng.normal(size=(30, 3))
    y = ["p" if v > 0 else "q" for v in x[:, 0] + x[:, 2]]
    for kind in ("logistic", "mlp", "tree"):
        a = save_model(train_builtin(kind, x, y, {"seed": 5, "max_iter": 200}))
        b = save_model(train_builtin(kind, x, y, {"seed": 5, "max_iter": 200}))
        assert a == b


def test_persistence_bit_exact(rng):
    x = rng.normal(size=(30, 3))
    y = ["p" if v > 0 else "q" for v in x[:, 0]]
    for kind in ("logistic", "mlp", "tree"):
        h = train_builtin(kind, x, y, {"max_iter": 100})
        again = load_model(save_model(h))
        assert np.array_equal(again.predict(x), h.predict(x))
        assert again.labels == h.labels


def test_load_model_rejects_garbage():
    with pytest.raises(ModelError):
        load_model({"kind": "forest", "params": {}})


def test_detector_constant_train():
    d = fit_detector(make_timeseries([0, 1, 2], [2.0, 2.0, 2.0]))
    r = detect(d, make_timeseries([0, 1], [2.0, 2.0]))
    assert r.score == 0.0 and not r.is_anomaly


def test_detector_direct_formula():
    d = ThresholdDetector(0.0, 1.0, 3.0)
    r = detect(d, make_timeseries([0, 1, 2], [0.5, 5.0, -1.0]))
    assert r.score == 5.0 and r.is_anomaly
    np.testing.assert_array_equal(r.deviations, [0.5, 5.0, 1.0])


def test_detector_strict_threshold():
    d = ThresholdDetector(0.0, 1.0, 3.0)
    assert not detect(d, make_timeseries([0], [3.0])).is_anomaly
    assert not detect(d, make_timeseries([0], [-3.0])).is_anomaly


def test_detector_needs_two_points():
    with pytest.raises(ValueError):
        fit_detector(make_timeseries([0], [1.0]))
