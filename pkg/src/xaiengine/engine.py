"""Name-based explainer registry and the local/global dispatch around it.

Typical use::

    xset = build_set(["lime", "shap", "pdp"], model, transform, train, seed=7)
    local = explain_local(xset, instances)
    glob = explain_global(xset, {"pdp": {"features": ["age"]}})
"""

from __future__ import annotations

import dataclasses
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import __version__
from .data import TabularBatch, TimeseriesWindow
from .errors import CapabilityError, SchemaError, UnknownExplainerError
from .explainers import (ale, class_imbalance, correlation_matrix, glass_linear_explain, glass_tree_explain,
                         integrated_gradients, kernel_shap, lime_explain, mace_cf, make_problem, morris, pdp,
                         select_features, ts_counterfactual, ts_shap, wachter_ce)
from .models.base import DIFFERENTIABLE, GLASS_LINEAR, GLASS_TREE, ModelHandle
from .models.detector import ThresholdDetector
from .preprocessing import FittedTransform, identity_transform
from .results import ErrorRecord, result_from_dict

logger = logging.getLogger(__name__)

LOCAL, GLOBAL, DATA = "local", "global", "data"
BLACK_BOX, DETECTOR, NO_MODEL = "black-box", "detector", "none"


@dataclass(frozen=True)
class ExplainerEntry:
    name: str
    scope: str
    requirement: str
    run: Callable
    data_kind: str = "tabular"

    def satisfied_by(self, model) -> str | None:
        """Name of the missing capability, or ``None`` when the model qualifies."""
        if self.requirement == NO_MODEL:
            return None
        if self.requirement == DETECTOR:
            return None if isinstance(model, ThresholdDetector) else "detector"
        if not isinstance(model, ModelHandle):
            return "model"
        if self.requirement == BLACK_BOX:
            return None
        return None if self.requirement in model.capabilities else self.requirement


@dataclass
class ExplainerSet:
    """Resolved entries plus everything they share.

    Mirrors the four factory inputs: explainer names (``entries``), the
    model, the pre-processing function (``transform``) and the optional
    post-processing (already folded into ``model.postprocess``).
    """

    entries: list
    model: object = None
    transform: FittedTransform | None = None
    train: object = None
    params: dict = field(default_factory=dict)
    seed: int = 0

    def options(self, name: str, extra: Mapping | None = None) -> dict:
        out = dict(self.params.get(name, {}))
        if extra and name in extra:
            out.update(extra[name])
        out.setdefault("seed", self.seed)
        return out


@dataclass
class ExplanationBundle:
    instances: list = field(default_factory=list)
    instance_kind: str = "tabular"
    local: dict = field(default_factory=dict)
    global_: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def merge(self, other: "ExplanationBundle") -> "ExplanationBundle":
        meta = dict(self.meta)
        timings = dict(meta.get("timings", {}))
        timings.update(other.meta.get("timings", {}))
        meta.update(other.meta)
        meta["timings"] = timings
        meta["explainers"] = list(dict.fromkeys(self.meta.get("explainers", []) + other.meta.get("explainers", [])))
        return ExplanationBundle(self.instances or other.instances, self.instance_kind if self.instances
                                 else other.instance_kind, {**self.local, **other.local},
                                 {**self.global_, **other.global_}, meta)

    def errors(self) -> list:
        out = [r for rs in self.local.values() for r in rs if isinstance(r, ErrorRecord)]
        out += [r for rs in self.global_.values() for r in rs if isinstance(r, ErrorRecord)]
        return out

    def to_dict(self) -> dict:
        return {
            "instances": self.instances,
            "instance_kind": self.instance_kind,
            "local": {k: [r.to_dict() for r in v] for k, v in self.local.items()},
            "global": {k: [r.to_dict() for r in v] for k, v in self.global_.items()},
            "meta": self.meta,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ExplanationBundle":
        return cls(
            list(doc.get("instances", [])),
            doc.get("instance_kind", "tabular"),
            {k: [result_from_dict(r) for r in v] for k, v in doc.get("local", {}).items()},
            {k: [result_from_dict(r) for r in v] for k, v in doc.get("global", {}).items()},
            dict(doc.get("meta", {})),
        )


# -- runners -----------------------------------------------------------------
# local runners: (xset, instance, opts) -> result; global runners: (xset, opts) -> list of results


def _output(xset, opts):
    out = opts.get("output")
    if isinstance(out, str):
        return list(xset.model.labels).index(out)
    return out


def _run_lime(xset, inst, opts):
    return lime_explain(xset.model, xset.train, inst, opts.get("n_samples", 5000), opts.get("top_k"),
                        opts["seed"], xset.transform, _output(xset, opts), opts.get("kernel_width"))


def _run_shap(xset, inst, opts):
    return kernel_shap(xset.model, xset.train, inst, opts.get("n_coalitions", 2048), opts["seed"],
                       xset.transform, _output(xset, opts), opts.get("max_background", 100))


def _run_ig(xset, inst, opts):
    baseline = opts.get("baseline")
    if baseline is None:
        baseline = xset.transform.transform(xset.train).mean(axis=0)
    return integrated_gradients(xset.model, inst, np.asarray(baseline, dtype=float), opts.get("steps", 256),
                                _output(xset, opts), xset.transform)


def _problem(xset, inst, opts):
    return make_problem(xset.model, xset.train, inst, xset.transform, opts.get("target_class"),
                        opts.get("immutable", ()), opts.get("lam", 0.1), opts.get("margin", 0.0))


def _run_ce(xset, inst, opts):
    return wachter_ce(xset.model, xset.train, _problem(xset, inst, opts), xset.transform,
                      opts.get("steps", 300), opts.get("lr", 0.02), seed=opts["seed"])


def _run_mace(xset, inst, opts):
    return mace_cf(xset.model, xset.train, _problem(xset, inst, opts), xset.transform,
                   opts.get("max_changes", 3), opts.get("n_examples", 1), opts.get("max_evaluations", 50000),
                   opts["seed"])


def _run_glass_linear(xset, inst, opts):
    return glass_linear_explain(xset.model, inst, xset.transform, _output(xset, opts))


def _run_glass_tree(xset, inst, opts):
    return glass_tree_explain(xset.model, inst, xset.transform)


def _ts_reference(xset, opts):
    ref = opts.get("reference")
    return xset.model.train_mean if ref is None else ref


def _run_ts_shap(xset, window, opts):
    return ts_shap(xset.model.score, window, _ts_reference(xset, opts), opts.get("n_segments", 8),
                   opts.get("n_permutations", 200), opts["seed"])


def _run_ts_ce(xset, window, opts):
    return ts_counterfactual(xset.model, window, _ts_reference(xset, opts), opts.get("n_segments", 8),
                             opts.get("max_fraction", 0.5), opts["seed"])


def _features(xset, opts, continuous_only=False):
    names = opts.get("features")
    if names is None:
        names = xset.transform.feature_names
        if continuous_only:
            names = [n for n in names if xset.transform.column_stats(n).kind == "continuous"]
    return list(names)


def _run_pdp(xset, opts):
    return [pdp(xset.model, xset.train, f, opts.get("grid_size", 20), xset.transform, opts.get("ice", 0))
            for f in _features(xset, opts)]


def _run_ale(xset, opts):
    return [ale(xset.model, xset.train, f, opts.get("n_bins", 10), xset.transform)
            for f in _features(xset, opts, continuous_only=True)]


def _run_morris(xset, opts):
    return [morris(xset.model, xset.train, opts.get("r", 10), opts.get("p", 4), opts["seed"],
                   opts.get("bounds"), xset.transform, _output(xset, opts))]


def _run_correlation(xset, opts):
    return [correlation_matrix(xset.train)]


def _run_imbalance(xset, opts):
    return [class_imbalance(xset.train, opts.get("target"), opts.get("by"))]


def _run_selection(xset, opts):
    k = opts.get("k", len(xset.train.schema.feature_names))
    return [select_features(xset.train, opts.get("target"), k)]


REGISTRY: dict[str, ExplainerEntry] = {}


def register(entry: ExplainerEntry) -> None:
    if entry.name in REGISTRY:
        raise ValueError(f"explainer {entry.name!r} already registered")
    REGISTRY[entry.name] = entry


for _entry in (
    ExplainerEntry("correlation", DATA, NO_MODEL, _run_correlation),
    ExplainerEntry("imbalance", DATA, NO_MODEL, _run_imbalance),
    ExplainerEntry("feature-selection", DATA, NO_MODEL, _run_selection),
    ExplainerEntry("pdp", GLOBAL, BLACK_BOX, _run_pdp),
    ExplainerEntry("ale", GLOBAL, BLACK_BOX, _run_ale),
    ExplainerEntry("morris", GLOBAL, BLACK_BOX, _run_morris),
    ExplainerEntry("lime", LOCAL, BLACK_BOX, _run_lime),
    ExplainerEntry("shap", LOCAL, BLACK_BOX, _run_shap),
    ExplainerEntry("ig", LOCAL, DIFFERENTIABLE, _run_ig),
    ExplainerEntry("ce", LOCAL, BLACK_BOX, _run_ce),
    ExplainerEntry("mace-greedy", LOCAL, BLACK_BOX, _run_mace),
    ExplainerEntry("glass-linear", LOCAL, GLASS_LINEAR, _run_glass_linear),
    ExplainerEntry("glass-tree", LOCAL, GLASS_TREE, _run_glass_tree),
    ExplainerEntry("ts-shap", LOCAL, DETECTOR, _run_ts_shap, "timeseries"),
    ExplainerEntry("ts-ce", LOCAL, DETECTOR, _run_ts_ce, "timeseries"),
):
    register(_entry)


_UNCHECKED = object()


def resolve(names: Sequence[str], model=_UNCHECKED) -> list[ExplainerEntry]:
    """Look up entries by key; when ``model`` is passed (even ``None``), check capabilities too."""
    entries = []
    for name in names:
        key = name.strip().lower()
        if key not in REGISTRY:
            raise UnknownExplainerError(name, REGISTRY)
        entries.append(REGISTRY[key])
    if model is not _UNCHECKED:
        for e in entries:
            missing = e.satisfied_by(model)
            if missing:
                raise CapabilityError(f"explainer {e.name!r} requires a {missing} model")
    return entries


def build_set(names: Sequence[str], model=None, transform: FittedTransform | None = None, train=None,
              postprocess: str | None = None, params: Mapping | None = None, seed: int = 0) -> ExplainerSet:
    """Factory taking explainer names, model, pre-processing and optional post-processing."""
    if postprocess is not None:
        if not isinstance(model, ModelHandle):
            raise CapabilityError("post-processing needs a model handle")
        model = dataclasses.replace(model, postprocess=postprocess)
    entries = resolve(list(dict.fromkeys(names)), model)
    if transform is None and isinstance(train, TabularBatch) and any(e.requirement != NO_MODEL for e in entries):
        transform = identity_transform(train.schema)
    order = list(REGISTRY)
    entries.sort(key=lambda e: order.index(e.name))
    return ExplainerSet(entries, model, transform, train, dict(params or {}), seed)


def _instance_list(instances):
    if isinstance(instances, TabularBatch):
        return [instances.take([i]) for i in range(instances.n_rows)], "tabular"
    if isinstance(instances, TimeseriesWindow):
        return [instances], "timeseries"
    items = list(instances)
    if all(isinstance(w, TimeseriesWindow) for w in items):
        return items, "timeseries"
    raise SchemaError("instances must be a TabularBatch or a list of TimeseriesWindow")


def _instance_doc(inst, kind):
    if kind == "timeseries":
        return inst.to_dict()
    return inst.row(0)


def _guarded(name, fn, instance=None):
    try:
        return fn()
    except Exception as exc:  # isolation: one explainer failing must not abort the run
        logger.info("explainer %s failed%s: %s", name,
                       "" if instance is None else f" on instance {instance}", exc)
        return ErrorRecord(name, type(exc).__name__, str(exc), instance)


def _meta(xset, timings):
    return {"seed": xset.seed, "timings": timings, "version": __version__,
            "explainers": [e.name for e in xset.entries]}


def explain_local(xset: ExplainerSet, instances, params: Mapping | None = None) -> ExplanationBundle:
    """Run every local entry on every instance; results keyed by entry name, in registry order."""
    items, kind = _instance_list(instances)
    if kind == "tabular" and xset.transform is not None:
        for inst in items:
            xset.transform._check(inst.schema)
    local, timings = {}, {}
    for entry in xset.entries:
        if entry.scope != LOCAL:
            continue
        if entry.data_kind != kind:
            local[entry.name] = [ErrorRecord(entry.name, "SchemaError",
                                             f"{entry.name} explains {entry.data_kind} instances", i)
                                 for i in range(len(items))]
            continue
        opts = xset.options(entry.name, params)
        start = time.perf_counter()
        local[entry.name] = [_guarded(entry.name, lambda inst=inst: entry.run(xset, inst, opts), i)
                             for i, inst in enumerate(items)]
        timings[entry.name] = time.perf_counter() - start
    return ExplanationBundle([_instance_doc(i, kind) for i in items], kind, local, {}, _meta(xset, timings))


def explain_global(xset: ExplainerSet, params: Mapping | None = None) -> ExplanationBundle:
    """Run global- and data-scope entries; ``params`` carries per-explainer options."""
    glob, timings = {}, {}
    for entry in xset.entries:
        if entry.scope == LOCAL:
            continue
        opts = xset.options(entry.name, params)
        start = time.perf_counter()
        out = _guarded(entry.name, lambda: entry.run(xset, opts))
        glob[entry.name] = out if isinstance(out, list) else [out]
        timings[entry.name] = time.perf_counter() - start
    return ExplanationBundle([], "tabular", {}, glob, _meta(xset, timings))


def explain(xset: ExplainerSet, instances=None, params: Mapping | None = None) -> ExplanationBundle:
    """Local results for ``instances`` (if any) merged with all global results."""
    bundle = explain_global(xset, params)
    if instances is not None:
        bundle = explain_local(xset, instances, params).merge(bundle)
    return bundle
