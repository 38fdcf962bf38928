"""Counterfactual search.

``wachter_ce`` minimizes ``lam * hinge(margin_score) + L1`` by proximal
gradient descent over continuous features, doubling ``lam`` until a valid
example appears. ``mace_cf`` is a black-box greedy search with pruning
that handles mixed feature types ("mace-greedy" in the registry).

Distances are L1 in standardized units for continuous features plus one
per changed categorical feature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import CATEGORICAL, CONTINUOUS, TabularBatch
from ..errors import SchemaError
from ..models.base import ModelHandle
from ..preprocessing import FittedTransform
from ..results import CounterfactualResult
from .common import FeatureSpace, feature_space, single_instance

DECILES = np.linspace(0.1, 0.9, 9)


@dataclass(frozen=True)
class CFProblem:
    instance: TabularBatch
    original_class: int
    target_class: int | None = None
    bounds: dict = field(default_factory=dict)
    immutable: frozenset = frozenset()
    lam: float = 0.1
    margin: float = 0.0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        object.__setattr__(self, "immutable", frozenset(self.immutable))
        target = self.instance.schema.target
        if target is not None and target in self.immutable:
            raise ValueError("the target column cannot be listed as immutable")
        for name, (lo, hi) in self.bounds.items():
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ValueError(f"bounds for {name!r} must be finite")

    def is_valid(self, predicted: int) -> bool:
        if self.target_class is not None:
            return predicted == self.target_class
        return predicted != self.original_class

    def goal_score(self, probs: np.ndarray) -> np.ndarray:
        """Probability mass the search maximizes: target class, else best other class."""
        probs = np.atleast_2d(probs)
        if self.target_class is not None:
            return probs[:, self.target_class]
        others = np.delete(probs, self.original_class, axis=1)
        return others.max(axis=1) if others.shape[1] else np.zeros(len(probs))


def make_problem(model: ModelHandle, train: TabularBatch, instance: TabularBatch,
                 transform: FittedTransform | None = None, target_class=None, immutable=(),
                 lam: float = 0.1, margin: float = 0.0) -> CFProblem:
    """Problem with the original class predicted fresh and bounds from train min/max."""
    single_instance(instance)
    space = feature_space(model, transform, train)
    original = int(np.argmax(space.predict(space.encode(instance))[0]))
    if isinstance(target_class, str):
        target_class = list(model.labels).index(target_class)
    bounds = {}
    for s in space.transform.stats:
        if s.kind == CONTINUOUS:
            col = space.transform.fill_column(s.name, train.column(s.name))
            bounds[s.name] = (float(np.min(col)), float(np.max(col)))
    return CFProblem(instance, original, target_class, bounds, frozenset(immutable), lam, margin)


class _Scaler:
    """Standardized coordinates for continuous features (train mean/std, population)."""

    def __init__(self, space: FeatureSpace, train: TabularBatch):
        self.mean, self.scale = {}, {}
        for s in space.transform.stats:
            if s.kind == CONTINUOUS:
                col = space.transform.fill_column(s.name, train.column(s.name))
                sd = float(np.std(col))
                self.mean[s.name] = float(np.mean(col))
                self.scale[s.name] = sd if sd > 0 else 1.0

    def distance(self, old: dict, new: dict, kinds: dict) -> float:
        total = 0.0
        for name, kind in kinds.items():
            if kind == CONTINUOUS:
                total += abs(float(new[name]) - float(old[name])) / self.scale[name]
            elif new[name] != old[name]:
                total += 1.0
        return total


def _encode_rows(space: FeatureSpace, rows: list[dict]) -> np.ndarray:
    ft = space.transform
    out = np.empty((len(rows), ft.width))
    for s, g in zip(ft.stats, space.groups):
        vals = [r[s.name] for r in rows]
        arr = np.array(vals, dtype=float) if s.kind == CONTINUOUS else np.array(vals, dtype=object)
        out[:, g] = ft.transform_column(s.name, arr)
    return out


def _example(space, model, problem, scaler, original: dict, values: dict, kinds) -> dict:
    probs = space.predict(_encode_rows(space, [values]))[0]
    cls = int(np.argmax(probs))
    changes = {n: [original[n], values[n]] for n in space.names if values[n] != original[n]}
    return {
        "values": dict(values),
        "changes": changes,
        "predicted_class": model.labels[cls],
        "probability": float(probs[cls]),
        "distance": scaler.distance(original, values, kinds),
        "valid": problem.is_valid(cls),
    }


def _original(space: FeatureSpace, problem: CFProblem) -> dict:
    row = problem.instance.row(0)
    ft = space.transform
    out = {}
    for s in ft.stats:
        out[s.name] = ft.fill_column(s.name, problem.instance.column(s.name))[0]
        if s.kind == CONTINUOUS:
            out[s.name] = float(out[s.name])
    # keep non-missing cells exactly as given
    out.update({n: row[n] for n in out if row[n] is not None})
    return out


def _labels(model: ModelHandle, problem: CFProblem):
    target = model.labels[problem.target_class] if problem.target_class is not None else None
    return model.labels[problem.original_class], target


def wachter_ce(model: ModelHandle, train: TabularBatch, problem: CFProblem,
               transform: FittedTransform | None = None, steps: int = 300, lr: float = 0.02,
               growth: float = 2.0, lam_max: float = 1e4, fd_step: float = 1e-4,
               seed: int = 0) -> CounterfactualResult:
    """Hinge + L1 counterfactual over continuous features (proximal gradient).

    ``seed`` is accepted for interface symmetry; the search is deterministic.
    """
    space = feature_space(model, transform, train)
    ft = space.transform
    kinds = {s.name: s.kind for s in ft.stats}
    mutable = [n for n in space.names if n not in problem.immutable]
    bad = [n for n in mutable if kinds[n] != CONTINUOUS]
    if bad:
        raise SchemaError(f"wachter_ce handles continuous features only; mutable categorical: {bad}")
    scaler = _Scaler(space, train)
    original = _original(space, problem)
    orig_label, target_label = _labels(model, problem)
    names = [n for n in space.names if kinds[n] == CONTINUOUS]
    free = np.array([n in mutable for n in names])
    u0 = np.array([(original[n] - scaler.mean[n]) / scaler.scale[n] for n in names])
    lo = np.array([(problem.bounds.get(n, (-np.inf, np.inf))[0] - scaler.mean[n]) / scaler.scale[n] for n in names])
    hi = np.array([(problem.bounds.get(n, (-np.inf, np.inf))[1] - scaler.mean[n]) / scaler.scale[n] for n in names])
    base_enc = _encode_rows(space, [original])[0]
    cols = [space.groups[space.names.index(n)] for n in names]
    slopes = [ft.slope(n) for n in names]
    analytic = model.differentiable and all(s is not None for s in slopes)

    def encode(us: np.ndarray) -> np.ndarray:
        us = np.atleast_2d(us)
        enc = np.repeat(base_enc[None, :], len(us), axis=0)
        for j, n in enumerate(names):
            raw = scaler.mean[n] + us[:, j] * scaler.scale[n]
            enc[:, cols[j]] = ft.transform_column(n, raw)
        return enc

    def margin_score(probs: np.ndarray) -> np.ndarray:
        probs = np.atleast_2d(probs)
        if problem.target_class is not None:
            t = problem.target_class
            return np.delete(probs, t, axis=1).max(axis=1) - probs[:, t]
        y = problem.original_class
        return probs[:, y] - np.delete(probs, y, axis=1).max(axis=1)

    def score_grad(u: np.ndarray, probs: np.ndarray) -> np.ndarray:
        if analytic:
            enc = encode(u)[0]
            if problem.target_class is not None:
                hi_cls = problem.target_class
                others = [c for c in range(len(probs)) if c != hi_cls]
                lo_cls = others[int(np.argmax(probs[others]))]
                pos, neg = lo_cls, hi_cls
            else:
                y = problem.original_class
                others = [c for c in range(len(probs)) if c != y]
                pos, neg = y, others[int(np.argmax(probs[others]))]
            g_enc = model.gradient(enc, pos) - model.gradient(enc, neg)
            return np.array([g_enc[cols[j]].sum() * slopes[j] * scaler.scale[n] for j, n in enumerate(names)])
        offsets = np.eye(len(u)) * fd_step
        pts = np.vstack([u + offsets, u - offsets])
        s = margin_score(space.predict(encode(pts)))
        return (s[:len(u)] - s[len(u):]) / (2 * fd_step)

    def result(found, examples, trace, best_p):
        return CounterfactualResult("ce", found, original, orig_label, target_label, examples, best_p, trace)

    probs0 = space.predict(encode(u0))[0]
    if problem.is_valid(int(np.argmax(probs0))):
        return result(True, [_example(space, model, problem, scaler, original, original, kinds)], [0.0],
                      float(problem.goal_score(probs0)[0]))
    if not free.any():
        return result(False, [], [], float(problem.goal_score(probs0)[0]))

    best_u, best_d, trace = None, np.inf, []
    best_goal = float(problem.goal_score(probs0)[0])
    u = u0.copy()
    lam = problem.lam
    while lam <= lam_max and best_u is None:
        for _ in range(steps):
            probs = space.predict(encode(u))[0]
            best_goal = max(best_goal, float(problem.goal_score(probs)[0]))
            if problem.is_valid(int(np.argmax(probs))):
                dist = float(np.abs(u - u0).sum())
                if dist < best_d:
                    best_u, best_d = u.copy(), dist
                    trace.append(dist)
            step = u.copy()
            if margin_score(probs)[0] + problem.margin > 0:
                step = step - lr * lam * score_grad(u, probs)
            shifted = step - u0
            u = u0 + np.sign(shifted) * np.maximum(np.abs(shifted) - lr, 0.0)
            u = np.where(free, np.clip(u, lo, hi), u0)
        lam *= growth
    if best_u is None:
        return result(False, [], trace, best_goal)
    values = dict(original)
    for j, n in enumerate(names):
        if free[j]:
            values[n] = float(scaler.mean[n] + best_u[j] * scaler.scale[n])
    ex = _example(space, model, problem, scaler, original, values, kinds)
    return result(ex["valid"], [ex], trace, best_goal)


def _candidates(space: FeatureSpace, train: TabularBatch, problem: CFProblem, original: dict,
                train_pred: np.ndarray) -> dict:
    ft = space.transform
    if problem.target_class is not None:
        hit = train_pred == problem.target_class
    else:
        hit = (train_pred != problem.original_class) & (train_pred >= 0)
    out = {}
    for s in ft.stats:
        if s.name in problem.immutable:
            continue
        if s.kind == CATEGORICAL:
            cats = list(train.schema.categories.get(s.name, s.categories))
            out[s.name] = [c for c in cats if c != original[s.name]]
            continue
        col = ft.fill_column(s.name, train.column(s.name))
        pool = col[hit] if hit.any() else col
        qs = []
        # observed values only, so candidates stay realistic (no interpolation between rows)
        for q in np.quantile(pool, DECILES, method="lower"):
            q = float(q)
            if q not in qs and q != original[s.name]:
                qs.append(q)
        out[s.name] = qs
    return out


def mace_cf(model: ModelHandle, train: TabularBatch, problem: CFProblem, transform: FittedTransform | None = None,
            max_changes: int = 3, n_examples: int = 1, max_evaluations: int = 50000,
            seed: int = 0, batch_size: int = 4096) -> CounterfactualResult:
    """Greedy single-substitution search, then revert-pruning, then diversity reruns.

    ``seed`` is accepted for interface symmetry; ties are broken by feature
    then candidate order so the search is deterministic.
    """
    space = feature_space(model, transform, train, batch_size)
    kinds = {s.name: s.kind for s in space.transform.stats}
    scaler = _Scaler(space, train)
    original = _original(space, problem)
    orig_label, target_label = _labels(model, problem)
    budget = [max_evaluations]

    def evaluate(rows: list[dict]) -> np.ndarray:
        budget[0] -= len(rows)
        return space.predict(_encode_rows(space, rows))

    probs0 = evaluate([original])[0]
    if problem.is_valid(int(np.argmax(probs0))):
        ex = _example(space, model, problem, scaler, original, original, kinds)
        return CounterfactualResult("mace-greedy", True, original, orig_label, target_label, [ex],
                                    float(problem.goal_score(probs0)[0]))
    if budget[0] >= train.n_rows:
        train_pred = np.argmax(evaluate_train(space, train, budget), axis=1)
    else:  # too expensive to label train: fall back to full-column deciles
        train_pred = np.full(train.n_rows, -1)
    pool = _candidates(space, train, problem, original, train_pred)
    best_goal = float(problem.goal_score(probs0)[0])

    def greedy(excluded: set):
        nonlocal best_goal
        current, order = dict(original), []
        while len(order) < max_changes:
            moves = [(n, c) for n in space.names if n in pool and n not in excluded and n not in order
                     for c in pool[n]]
            if not moves or budget[0] < len(moves):
                return None, order
            rows = []
            for n, c in moves:
                row = dict(current)
                row[n] = c
                rows.append(row)
            probs = evaluate(rows)
            goal = problem.goal_score(probs)
            pick = int(np.argmax(goal))
            best_goal = max(best_goal, float(goal[pick]))
            n, c = moves[pick]
            current[n] = c
            order.append(n)
            if problem.is_valid(int(np.argmax(probs[pick]))):
                return current, order
        return None, order

    def prune(values: dict, order: list) -> dict:
        for n in list(order):
            trial = dict(values)
            trial[n] = original[n]
            if budget[0] < 1:
                break
            if problem.is_valid(int(np.argmax(evaluate([trial])[0]))):
                values = trial
        return values

    examples, excluded = [], set()
    for _ in range(max(1, n_examples)):
        found, order = greedy(excluded)
        if found is None:
            break
        found = prune(found, order)
        ex = _example(space, model, problem, scaler, original, found, kinds)
        if ex["valid"] and all(ex["values"] != e["values"] for e in examples):
            examples.append(ex)
        if not order:
            break
        excluded.add(order[0])
    return CounterfactualResult("mace-greedy", bool(examples), original, orig_label, target_label, examples,
                                best_goal)


def evaluate_train(space: FeatureSpace, train: TabularBatch, budget: list) -> np.ndarray:
    budget[0] -= train.n_rows
    return space.predict(space.encode(train))
