"""Acceptance suite: eleven end-to-end criteria, one PASS/FAIL line each.

Run alone with ``pytest tests/test_acceptance.py -s`` to see the lines
inline; they are also repeated in the terminal summary.
"""

import contextlib
import json
import sys
import time

import numpy as np

from xaiengine.cli import cli_main
from xaiengine.data import batch_from_array, make_timeseries, read_csv
from xaiengine.engine import build_set, explain
from xaiengine.explainers import (ale, integrated_gradients, kernel_shap, lime_explain, mace_cf, make_problem,
                                  morris, pdp, ts_counterfactual, ts_shap, wachter_ce)
from xaiengine.explainers.timeseries import segments
from xaiengine.fixtures import GAIN_THRESHOLD, SCHEMA, fixture_path
from xaiengine.models import LinearModel, fit_detector, random_mlp, spawn_external, train_builtin
from xaiengine.models.base import function_model
from xaiengine.preprocessing import TransformSpec, fit_transform_spec
from xaiengine.serialize import to_json

from oracles import (brute_shapley, central_difference, grid_crossing_1d, min_l0_changes, pdp_double_loop,
                     set_shapley)

RESULTS = {}


@contextlib.contextmanager
def criterion(n, title):
    start = time.perf_counter()
    try:
        yield
    except BaseException:
        RESULTS[n] = ("FAIL", title, time.perf_counter() - start)
        print(f"criterion {n:2d} FAIL  {title}")
        raise
    RESULTS[n] = ("PASS", title, time.perf_counter() - start)
    print(f"criterion {n:2d} PASS  {title} ({RESULTS[n][2]:.2f}s)")


def random_model(kind, d, rng, seed):
    x = rng.normal(size=(40, d))
    if kind == "linear":
        return LinearModel(rng.normal(size=(d, 1)), rng.normal(size=1)).handle()
    if kind == "tree":
        y = x[:, 0] * x[:, -1] + np.sign(x[:, d // 2]) + rng.normal(0, 0.1, 40)
        return train_builtin("tree", x, y, {"task": "regression", "max_depth": 4})
    if seed % 2:
        return random_mlp([d, 6, 3], seed=seed, classification=True).handle(["a", "b", "c"])
    return random_mlp([d, 5, 1], seed=seed).handle()


def test_01_exact_shap_matches_brute_force():
    with criterion(1, "exact kernel SHAP equals subset-enumeration Shapley (1e-6, 50 models, <=60s)"):
        rng = np.random.default_rng(2024)
        start = time.perf_counter()
        worst = 0.0
        for i in range(50):
            kind = ("linear", "tree", "mlp")[i % 3]
            d = 2 + i % 7
            h = random_model(kind, d, rng, i)
            bg = rng.normal(size=(int(rng.integers(1, 17)), d))
            x = rng.normal(size=d)
            r = kernel_shap(h, batch_from_array(bg), batch_from_array([x]))
            phi, base = brute_shapley(lambda z: h.predict(z)[:, r.output_index], x, bg)
            worst = max(worst, float(np.max(np.abs(np.array(r.scores) - phi))))
            assert abs(r.base_value - base) <= 1e-6
        assert worst <= 1e-6, worst
        assert time.perf_counter() - start <= 60


def test_02_shap_axioms():
    with criterion(2, "SHAP efficiency (1e-6 exact, 1e-3 sampled), symmetry and dummy (1e-6)"):
        rng = np.random.default_rng(5)
        m = random_mlp([6, 8, 1], seed=3).handle()
        bg, x = rng.normal(size=(12, 6)), rng.normal(size=(1, 6))
        fx = m.predict(x)[0, 0]
        r = kernel_shap(m, batch_from_array(bg), batch_from_array(x))
        assert abs(r.base_value + sum(r.scores) - fx) <= 1e-6
        big = random_mlp([14, 8, 1], seed=4).handle()
        bg14, x14 = rng.normal(size=(30, 14)), rng.normal(size=(1, 14))
        s = kernel_shap(big, batch_from_array(bg14), batch_from_array(x14), n_coalitions=500, seed=1)
        assert abs(s.base_value + sum(s.scores) - big.predict(x14)[0, 0]) <= 1e-3
        # x0 and x1 enter symmetrically, x2 is ignored
        f = function_model(lambda z: np.exp(0.3 * (z[:, 0] + z[:, 1])) + z[:, 0] * z[:, 1] + z[:, 3])
        bgs = rng.normal(size=(10, 4))
        bgs[:, 1] = bgs[:, 0]
        r = kernel_shap(f, batch_from_array(bgs), batch_from_array([[1.2, 1.2, 9.0, -0.4]]))
        assert abs(r.scores[0] - r.scores[1]) <= 1e-6
        assert abs(r.scores[2]) <= 1e-6


def test_03_integrated_gradients():
    with criterion(3, "IG completeness (1e-4 at 256 steps), linear exactness, gradients vs finite differences"):
        rng = np.random.default_rng(11)
        for seed in range(10):
            h = random_mlp([4, 10, 2], seed=seed, classification=True).handle(["n", "y"])
            x, b = rng.normal(size=4), rng.normal(size=4)
            r = integrated_gradients(h, x, b, steps=256)
            fx, fb = h.predict(np.vstack([x, b]))[:, r.output_index]
            assert abs(sum(r.scores) - (fx - fb)) <= 1e-4
        w = rng.normal(size=5)
        lin = LinearModel(w.reshape(-1, 1), np.array([0.7])).handle()
        x, b = rng.normal(size=5), rng.normal(size=5)
        assert integrated_gradients(lin, x, b, steps=256).scores == list(w * (x - b))
        net = random_mlp([5, 7, 3], seed=1, classification=True).handle(["a", "b", "c"])
        for _ in range(100):
            p = rng.normal(size=5)
            k = int(rng.integers(0, 3))
            fd = central_difference(lambda z: net.predict(z[None, :])[0, k], p)
            assert np.max(np.abs(net.gradient(p, k) - fd)) <= 1e-4


def test_04_global_effects():
    with criterion(4, "PDP equals double-loop oracle, ALE slope (1e-6), Morris mu = w*range and sigma <= 1e-9"):
        rng = np.random.default_rng(3)
        models = [random_mlp([3, 6, 1], seed=2).handle(),
                  train_builtin("tree", rng.normal(size=(50, 3)), rng.normal(size=50), {"task": "regression"}),
                  function_model(lambda z: np.sin(z[:, 0]) * z[:, 2] + np.abs(z[:, 1]))]
        for m in models:
            for rows in (1, 7, 20):
                bg = rng.normal(size=(rows, 3))
                for col in range(3):
                    r = pdp(m, batch_from_array(bg), f"x{col}", grid_size=6)
                    assert [v[0] for v in r.means] == pdp_double_loop(lambda z: m.predict(z)[:, 0], bg, col, r.grid)
        w = np.array([0.5, -3.0, 2.0])
        lin = LinearModel(w.reshape(-1, 1), np.array([1.0])).handle()
        bg = batch_from_array(rng.uniform(-2, 5, size=(300, 3)))
        for j in range(3):
            r = ale(lin, bg, f"x{j}", n_bins=8)
            slopes = np.diff(np.array(r.effects)[:, 0]) / np.diff(r.edges)
            assert np.max(np.abs(slopes - w[j])) <= 1e-6
        res = morris(lin, bg, r=10, p=4, seed=0)
        cols = np.column_stack([bg.column(n) for n in bg.schema.names])
        np.testing.assert_allclose(res.mu, w * (cols.max(0) - cols.min(0)), rtol=1e-12)
        assert max(res.sigma) <= 1e-9


def test_05_lime_ranking():
    with criterion(5, "LIME top feature matches argmax |w*std| in >= 9 of 10 seeds (N=5000, <=30s)"):
        rng = np.random.default_rng(8)
        std = np.array([1.0, 2.0, 0.5, 3.0, 1.5])
        w = np.array([1.0, -0.4, 2.0, 0.9, 0.3])
        train = rng.normal(size=(500, 5)) * std
        expect = int(np.argmax(np.abs(w * train.std(0))))
        h = LinearModel(w.reshape(-1, 1), np.zeros(1)).handle()
        inst = batch_from_array([np.quantile(train, 0.9, axis=0)])
        start = time.perf_counter()
        hits = 0
        for seed in range(10):
            r = lime_explain(h, batch_from_array(train), inst, n_samples=5000, seed=seed)
            hits += int(np.argmax(np.abs(r.scores))) == expect
        assert hits >= 9, hits
        assert time.perf_counter() - start <= 30


def test_06_counterfactual_validity_and_sparsity():
    with criterion(6, "wachter within 5% of grid oracle, mace L0-minimal (2), valid examples re-verify"):
        h = LinearModel(np.array([[0.0, 2.0]]), np.array([0.0, -6.0]), logistic=True).handle(["0", "1"])
        train = batch_from_array(np.linspace(0, 6, 61)[:, None])
        inst = batch_from_array([[1.0]])
        r = wachter_ce(h, train, make_problem(h, train, inst, target_class=1))
        best = grid_crossing_1d(lambda g: h.predict(g[:, None])[:, 1], 0.0, 6.0, 1.0)
        assert r.found and abs(abs(r.examples[0]["values"]["x0"] - 1.0) - best) <= 0.05 * best
        examples = [(h, r)]

        maj = function_model(lambda m: np.column_stack([m.sum(1) < 2, m.sum(1) >= 2]).astype(float),
                             n_outputs=2, task="classification", labels=["0", "1"])
        cube = batch_from_array([[a, b, c] for a in (0, 1) for b in (0, 1) for c in (0, 1)])
        r = mace_cf(maj, cube, make_problem(maj, cube, batch_from_array([[0.0, 0.0, 0.0]]), target_class=1),
                    n_examples=3)
        oracle = min_l0_changes(lambda v: int(v.sum() >= 2), [0, 0, 0], [(0, 1)] * 3, 1)
        assert oracle == 2 and r.found and len(r.examples[0]["changes"]) == oracle
        examples.append((maj, r))

        checked = 0
        for model, res in examples:
            for ex in res.examples:
                if ex["valid"]:
                    names = sorted(ex["values"], key=lambda n: int(n[1:]))
                    row = np.array([[ex["values"][n] for n in names]])
                    assert model.predict(row)[0].argmax() == 1
                    checked += 1
        assert checked >= 2


def test_07_income_counterfactual_changes_capital_gain():
    with criterion(7, "mace on the income fixture changes exactly capital_gain"):
        income = read_csv(fixture_path("income.csv"), SCHEMA)
        ft = fit_transform_spec(TransformSpec.default(income.schema, "identity", "ordinal"), income)
        enc = ft.transform(income)
        labels = list(income.schema.categories["income"])
        h = train_builtin("tree", enc, list(income.column("income")), {"labels": labels, "max_depth": 4})
        gain = ft.feature_names.index("capital_gain")
        assert np.array_equal(h.predicted_class(enc) == labels.index(">50K"), enc[:, gain] > GAIN_THRESHOLD)
        low = [i for i in range(income.n_rows) if income.column("income")[i] == "<=50K"][:5]
        for i in low:
            r = mace_cf(h, income, make_problem(h, income, income.take([i]), ft), ft)
            assert r.found
            assert set(r.examples[0]["changes"]) == {"capital_gain"}
            assert r.examples[0]["changes"]["capital_gain"][1] > GAIN_THRESHOLD


def test_08_timeseries_narrative():
    with criterion(8, "spiked window flagged, ts_shap (S=4) equals 2^4 oracle (1e-9) and peaks on spike, repair passes"):
        rng = np.random.default_rng(21)
        det = fit_detector(make_timeseries(np.arange(400), rng.normal(10, 1, 400), "cpu"), 3.0)
        vals = rng.normal(10, 0.4, 20)
        vals[13] = 19.0
        w = make_timeseries(np.arange(20), vals, "cpu")
        assert det.detect(w).is_anomaly
        r = ts_shap(det.score, w, det.train_mean, n_segments=4)
        segs = segments(20, 4)

        def value(present):
            v = np.full(20, det.train_mean)
            for i in present:
                a, b = segs[i]
                v[a:b] = vals[a:b]
            return det.score_values(v)

        np.testing.assert_allclose(r.scores, set_shapley(value, list(range(4))), atol=1e-9)
        spike_seg = next(i for i, (a, b) in enumerate(segs) if a <= 13 < b)
        assert int(np.argmax(np.abs(r.scores))) == spike_seg
        cf = ts_counterfactual(det, w)
        assert cf.valid and 13 in cf.modified_indices
        assert not det.detect(w.replace_values(cf.modified)).is_anomaly


def test_09_determinism(income_paths, tmp_path, capsys):
    with criterion(9, "equal seeds give byte-identical bundles and reports"):
        p = income_paths
        model = tmp_path / "m.json"
        assert cli_main(["train", "--kind", "mlp", "--data", p["data"], "--schema", p["schema"],
                         "--params", '{"model": {"hidden": [6], "max_iter": 50}}', "--out", str(model)]) == 0
        outs = []
        for k in range(2):
            out = tmp_path / f"b{k}.json"
            code = cli_main(["explain", "--data", p["data"], "--schema", p["schema"], "--model", str(model),
                             "--explainers", "lime,shap,ig,pdp,ale,morris,ce,mace-greedy", "--instances",
                             p["instances"], "--seed", "42", "--params",
                             '{"lime": {"n_samples": 500}, "shap": {"n_coalitions": 200}}', "--out", str(out)])
            assert code in (0, 5)
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]
        html = []
        for k in range(2):
            cli_main(["report", str(tmp_path / f"b{k}.json"), "--out", str(tmp_path / f"r{k}.html")])
            html.append((tmp_path / f"r{k}.html").read_bytes())
        assert html[0] == html[1]
        # in-process path, same seed, same bytes
        rng = np.random.default_rng(1)
        train = batch_from_array(rng.normal(size=(30, 3)))
        h = LinearModel(rng.normal(size=(3, 2)), np.zeros(2), logistic=True).handle(["a", "b"])
        docs = [to_json(explain(build_set(["lime", "shap", "morris"], h, None, train, seed=9), train.take([0, 1])),
                        train, zero_timings=True) for _ in range(2)]
        assert docs[0] == docs[1]
        capsys.readouterr()


def test_10_protocol(income_paths, tmp_path, capsys):
    with criterion(10, "subprocess handshake/predict/shutdown round trip, malformed reply exits 4 with request id"):
        child = [sys.executable, "-m", "xaiengine.models.echo_child", "--mode", "threshold", "--feature", "0",
                 "--cut", "0.5"]
        h = spawn_external(child, labels=["lo", "hi"])
        try:
            probs = h.predict(np.array([[0.2, 9.0], [0.8, -1.0]]))
            assert probs.shape == (2, 2) and list(probs.argmax(1)) == [0, 1]
        finally:
            assert h.model.close() == 0
        kinds = [json.loads(line)["type"] for d, line in h.model.wire if d == "->"]
        assert kinds == ["spec", "predict", "shutdown"]
        p = income_paths
        code = cli_main(["explain", "--data", p["data"], "--schema", p["schema"], "--model-cmd",
                         f"{sys.executable} -m xaiengine.models.echo_child --malformed 3", "--explainers", "shap",
                         "--instances", p["instances"], "--out", str(tmp_path / "b.json")])
        err = capsys.readouterr().err
        assert code == 4 and "request id 3" in err


def test_11_end_to_end(tmp_path, capsys):
    with criterion(11, "train, explain (lime,shap,pdp,mace-greedy), report on the 500-row fixture, exit 0, <=120s"):
        start = time.perf_counter()
        data, schema = str(fixture_path("income.csv")), str(fixture_path("income.schema.json"))
        inst = tmp_path / "inst.csv"
        lines = open(data, encoding="utf-8").read().splitlines()
        inst.write_text("\n".join(lines[:3]) + "\n")
        model, bundle, html = tmp_path / "m.json", tmp_path / "b.json", tmp_path / "r.html"
        assert cli_main(["train", "--kind", "tree", "--data", data, "--schema", schema, "--out", str(model)]) == 0
        assert cli_main(["explain", "--data", data, "--schema", schema, "--model", str(model), "--explainers",
                         "lime,shap,pdp,mace-greedy", "--instances", str(inst), "--out", str(bundle)]) == 0
        assert cli_main(["report", str(bundle), "--out", str(html)]) == 0
        text = html.read_text("utf-8")
        for name in ("lime", "shap", "mace-greedy"):
            assert text.count(f'data-scope="local" data-explainer="{name}"') == 2
        assert text.count('data-scope="global" data-explainer="pdp"') == 1
        assert 'class="panel error"' not in text
        assert time.perf_counter() - start <= 120
        capsys.readouterr()

