"""Self-contained static HTML report comparing explanation results.

Everything is inline: CSS in a ``<style>`` block and charts as ``<svg>``
elements built here. The output is a pure function of the bundle.
"""

from __future__ import annotations

import html
from dataclasses import dataclass, field

import numpy as np

from .engine import REGISTRY, ExplanationBundle
from .results import (ALEResult, CorrelationResult, CounterfactualResult, DecisionPath, ErrorRecord,
                      FeatureAttribution, FeatureSelectionResult, ImbalanceResult, PDPResult,
                      SensitivityResult, TimeseriesAttribution, TimeseriesCF)

POS, NEG, LINE2 = "#2563eb", "#dc2626", "#f59e0b"
PALETTE = ("#2563eb", "#f59e0b", "#10b981", "#8b5cf6", "#ef4444", "#0ea5e9")

CSS = """
body { font-family: "Segoe UI", Helvetica, Arial, sans-serif; margin: 0; background: #f4f6fb; color: #0f172a; }
main { max-width: 1200px; margin: 1.5rem auto; padding: 0 1rem; }
h1 { font-size: 1.5rem; } h2 { font-size: 1.2rem; margin: 0 0 .6rem; } h3 { font-size: 1rem; margin: 0 0 .4rem; }
section { background: #fff; border: 1px solid #dbe3ef; border-radius: 10px; padding: 1rem; margin-bottom: 1rem; }
.panels { display: grid; grid-template-columns: repeat(auto-fit, minmax(360px, 1fr)); gap: .8rem; }
.panel { border: 1px solid #e2e8f0; border-radius: 8px; padding: .7rem; background: #fbfdff; }
.panel.error { background: #fff5f5; border-color: #fecaca; }
.muted { color: #64748b; font-size: .85rem; }
table { border-collapse: collapse; width: 100%; font-size: .85rem; }
th, td { border-bottom: 1px solid #e2e8f0; padding: .3rem .4rem; text-align: left; }
dl.instance { display: grid; grid-template-columns: max-content 1fr; gap: .1rem .8rem; font-size: .85rem; }
dl.instance dt { color: #475569; }
svg text { font-size: 11px; fill: #334155; }
"""


def fmt(v) -> str:
    if v is None:
        return "missing"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, (int, float)):
        return f"{v:.4g}"
    return str(v)


def esc(v) -> str:
    return html.escape(fmt(v) if not isinstance(v, str) else v)


@dataclass
class ReportSpec:
    bundle: ExplanationBundle
    title: str = "Explanation report"
    instances: list | None = None  # instance indices to render, default all
    panel_order: list = field(default_factory=list)

    def __post_init__(self):
        keys = set(self.bundle.local) | set(self.bundle.global_)
        if not self.panel_order:
            registry = list(REGISTRY)
            self.panel_order = sorted(keys, key=lambda k: (registry.index(k) if k in registry else len(registry), k))
        extra = set(self.panel_order) - keys
        if extra:
            raise ValueError(f"panel order names explainers absent from the bundle: {sorted(extra)}")
        if self.instances is None:
            self.instances = list(range(len(self.bundle.instances)))


# -- SVG primitives ------------------------------------------------------------


def _scale(lo, hi, a, b):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (v - lo) / span * (b - a)


def bar_chart(labels, values, width=420, bar=18) -> str:
    values = [0.0 if v is None else float(v) for v in values]
    n = len(values)
    height = n * (bar + 4) + 10
    label_w = 150
    vmax = max([abs(v) for v in values] + [1e-12])
    mid = label_w + (width - label_w) / 2
    half = (width - label_w) / 2 - 50
    parts = [f'<svg class="chart bar" width="{width}" height="{height}" viewBox="0 0 {width} {height}" role="img">',
             f'<line x1="{mid:.1f}" y1="0" x2="{mid:.1f}" y2="{height}" stroke="#94a3b8"/>']
    for i, (lab, v) in enumerate(zip(labels, values)):
        y = 5 + i * (bar + 4)
        w = abs(v) / vmax * half
        x = mid if v >= 0 else mid - w
        color = POS if v >= 0 else NEG
        parts.append(f'<text x="{label_w - 6}" y="{y + bar - 5}" text-anchor="end">{html.escape(str(lab))[:28]}</text>')
        parts.append(f'<rect x="{x:.1f}" y="{y}" width="{w:.1f}" height="{bar}" fill="{color}"/>')
        tx = x + w + 4 if v >= 0 else x - 4
        anchor = "start" if v >= 0 else "end"
        parts.append(f'<text x="{tx:.1f}" y="{y + bar - 5}" text-anchor="{anchor}">{fmt(v)}</text>')
    parts.append("</svg>")
    return "".join(parts)


def line_chart(x, series, width=420, height=220, dashed=(), names=()) -> str:
    """``series`` is a list of y-lists sharing ``x``; indices in ``dashed`` draw dashed."""
    x = [float(v) for v in x]
    ys = [[float(v) for v in s] for s in series]
    pad_l, pad_r, pad_t, pad_b = 48, 10, 10, 28
    allv = [v for s in ys for v in s] or [0.0]
    sx = _scale(min(x), max(x), pad_l, width - pad_r)
    sy = _scale(min(allv), max(allv), height - pad_b, pad_t)
    parts = [f'<svg class="chart line" width="{width}" height="{height}" viewBox="0 0 {width} {height}" role="img">',
             f'<line x1="{pad_l}" y1="{height - pad_b}" x2="{width - pad_r}" y2="{height - pad_b}" stroke="#94a3b8"/>',
             f'<line x1="{pad_l}" y1="{pad_t}" x2="{pad_l}" y2="{height - pad_b}" stroke="#94a3b8"/>',
             f'<text x="{pad_l - 4}" y="{pad_t + 8}" text-anchor="end">{fmt(max(allv))}</text>',
             f'<text x="{pad_l - 4}" y="{height - pad_b}" text-anchor="end">{fmt(min(allv))}</text>',
             f'<text x="{pad_l}" y="{height - 8}">{fmt(min(x))}</text>',
             f'<text x="{width - pad_r}" y="{height - 8}" text-anchor="end">{fmt(max(x))}</text>']
    for i, s in enumerate(ys):
        pts = " ".join(f"{sx(a):.1f},{sy(b):.1f}" for a, b in zip(x, s))
        dash = ' stroke-dasharray="5,4"' if i in dashed else ""
        color = PALETTE[i % len(PALETTE)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"{dash}/>')
    for i, name in enumerate(names):
        parts.append(f'<text x="{pad_l + 8 + 110 * i}" y="{pad_t + 12}" fill="{PALETTE[i % len(PALETTE)]}">'
                     f'{html.escape(str(name))}</text>')
    parts.append("</svg>")
    return "".join(parts)


def heatmap(labels, matrix, cell=26) -> str:
    n = len(labels)
    off = 120
    size = off + n * cell + 4
    parts = [f'<svg class="chart heatmap" width="{size}" height="{size}" viewBox="0 0 {size} {size}" role="img">']
    for i, lab in enumerate(labels):
        parts.append(f'<text x="{off - 4}" y="{off + i * cell + cell * .65:.1f}" text-anchor="end">'
                     f'{html.escape(str(lab))[:18]}</text>')
        parts.append(f'<text transform="translate({off + i * cell + cell * .65:.1f},{off - 4}) rotate(-60)">'
                     f'{html.escape(str(lab))[:18]}</text>')
        for j in range(n):
            v = float(matrix[i][j] or 0.0)
            color = f"rgba(37,99,235,{abs(v):.3f})" if v >= 0 else f"rgba(220,38,38,{abs(v):.3f})"
            parts.append(f'<rect x="{off + j * cell}" y="{off + i * cell}" width="{cell - 1}" height="{cell - 1}" '
                         f'fill="{color}"><title>{html.escape(str(labels[i]))} / {html.escape(str(labels[j]))}: '
                         f'{fmt(v)}</title></rect>')
    parts.append("</svg>")
    return "".join(parts)


def table(header, rows) -> str:
    head = "".join(f"<th>{esc(h)}</th>" for h in header)
    body = "".join("<tr>" + "".join(f"<td>{esc(c)}</td>" for c in r) + "</tr>" for r in rows)
    return f"<table><thead><tr>{head}</tr></thead><tbody>{body}</tbody></table>"


# -- per-result renderers --------------------------------------------------------


def render_attribution(r: FeatureAttribution) -> str:
    order = sorted(range(len(r.scores)), key=lambda i: -abs(r.scores[i] or 0.0))[:15]
    labels = [f"{r.features[i]} = {fmt(r.values[i])}" for i in order]
    info = f"explained output: {esc(r.output_label)}"
    if r.prediction is not None:
        info += f"; model output {fmt(r.prediction)}"
    if r.base_value is not None:
        info += f"; base value {fmt(r.base_value)}"
    return f'<p class="muted">{info}</p>' + bar_chart(labels, [r.scores[i] for i in order])


def render_path(r: DecisionPath) -> str:
    rows = [[s["feature"], s["value"], ("<" if s["branch"] == "left" else ">=") + " " + fmt(s["threshold"]),
             s["fraction"]] for s in r.steps]
    return (table(["feature", "value", "test passed", "train fraction"], rows)
            + f'<p class="muted">leaf: {esc(r.predicted_label)} {esc(", ".join(fmt(v) for v in r.leaf_value))}; '
              f'train fraction {fmt(r.leaf_fraction)}</p>')


def render_counterfactual(r: CounterfactualResult) -> str:
    head = f'<p class="muted">original class: {esc(r.original_class)}'
    if r.target_class is not None:
        head += f"; target: {esc(r.target_class)}"
    head += "</p>"
    if not r.found:
        best = "" if r.best_probability is None else f" (best goal probability {fmt(r.best_probability)})"
        return head + f"<p><strong>not found</strong>{esc(best)}</p>"
    parts = [head]
    for k, ex in enumerate(r.examples):
        rows = [[name, old, new] for name, (old, new) in ex["changes"].items()]
        parts.append(f"<h3>what-if #{k + 1}: predicted {esc(ex['predicted_class'])} "
                     f"(p = {fmt(ex['probability'])}, distance {fmt(ex['distance'])}, "
                     f"{'valid' if ex['valid'] else 'invalid'})</h3>")
        parts.append(table(["feature", "old", "new"], rows) if rows else '<p class="muted">no change needed</p>')
    return "".join(parts)


def render_ts_attribution(r: TimeseriesAttribution) -> str:
    pts = r.point_scores()
    top = int(np.argmax(np.abs(r.scores))) if r.scores else 0
    a, b = r.segments[top]
    desc = (f"Dashed line: per-point share of segment Shapley scores. Largest |score| {fmt(r.scores[top])} on "
            f"timestamps {r.timestamps[a]}..{r.timestamps[b - 1]}; base {fmt(r.base_value)}, "
            f"score {fmt(r.score)}.")
    return (line_chart(r.timestamps, [r.values, pts], dashed=(1,), names=(r.name, "importance"))
            + f'<p class="muted">{esc(desc)}</p>')


def render_ts_cf(r: TimeseriesCF) -> str:
    if r.modified_indices:
        span = f"{r.timestamps[r.modified_indices[0]]}..{r.timestamps[r.modified_indices[-1]]}"
    else:
        span = "none"
    desc = (f"Dashed line: counterfactual window ({len(r.modified_indices)} points changed, timestamps {span}); "
            f"score {fmt(r.score_before)} -> {fmt(r.score_after)}; "
            f"{'no longer anomalous' if r.valid else 'still anomalous (not found)'}.")
    return (line_chart(r.timestamps, [r.original, r.modified], dashed=(1,), names=("original", "counterfactual"))
            + f'<p class="muted">{esc(desc)}</p>')


def render_pdp(r: PDPResult) -> str:
    means = np.asarray(r.means, dtype=float)
    if r.kind == "categorical":
        k = means.shape[1] - 1
        return (f'<p class="muted">{esc(r.feature)} (output {esc(r.output_labels[k])})</p>'
                + bar_chart(r.grid, means[:, k]))
    return (f'<p class="muted">{esc(r.feature)}</p>'
            + line_chart(r.grid, means.T.tolist(), names=r.output_labels))


def render_ale(r: ALEResult) -> str:
    eff = np.asarray(r.effects, dtype=float)
    return f'<p class="muted">{esc(r.feature)}</p>' + line_chart(r.edges, eff.T.tolist(), names=r.output_labels)


def render_morris(r: SensitivityResult) -> str:
    rows = sorted(zip(r.features, r.mu, r.mu_star, r.sigma), key=lambda t: -t[2])
    return (f'<p class="muted">r = {r.trajectories}, p = {r.levels}, output {esc(r.output_label)}</p>'
            + table(["feature", "mu", "mu*", "sigma"], rows))


def render_correlation(r: CorrelationResult) -> str:
    return heatmap(r.features, r.matrix)


def render_imbalance(r: ImbalanceResult) -> str:
    out = table(["class", "count", "frequency"], list(zip(r.labels, r.counts, r.frequencies)))
    if r.by:
        out += table([r.by] + r.labels, [[b] + row for b, row in zip(r.by_labels, r.crosstab)])
    return out


def render_selection(r: FeatureSelectionResult) -> str:
    return (f'<p class="muted">mutual information with {esc(r.target)} (nats); selected: '
            f'{esc(", ".join(r.selected))}</p>' + bar_chart(r.features, r.scores))


def render_error(r: ErrorRecord) -> str:
    return f"<p><strong>{esc(r.error_type)}</strong>: {esc(r.message)}</p>"


RENDERERS = {
    FeatureAttribution: render_attribution, DecisionPath: render_path, CounterfactualResult: render_counterfactual,
    TimeseriesAttribution: render_ts_attribution, TimeseriesCF: render_ts_cf, PDPResult: render_pdp,
    ALEResult: render_ale, SensitivityResult: render_morris, CorrelationResult: render_correlation,
    ImbalanceResult: render_imbalance, FeatureSelectionResult: render_selection, ErrorRecord: render_error,
}


def _panel(name, scope, body, instance=None, error=False) -> str:
    attrs = f'class="panel{" error" if error else ""}" data-scope="{scope}" data-explainer="{html.escape(name)}"'
    if instance is not None:
        attrs += f' data-instance="{instance}"'
    return f"<div {attrs}><h3>{html.escape(name)}</h3>{body}</div>"


def _instance_summary(doc, kind) -> str:
    if kind == "timeseries":
        return f'<p class="muted">{esc(doc.get("name", ""))}: {len(doc.get("values", []))} points</p>'
    items = "".join(f"<dt>{esc(k)}</dt><dd>{esc(v)}</dd>" for k, v in doc.items())
    return f'<dl class="instance">{items}</dl>'


def render_report(spec: ReportSpec | ExplanationBundle, title: str | None = None) -> str:
    if isinstance(spec, ExplanationBundle):
        spec = ReportSpec(spec, title or "Explanation report")
    b = spec.bundle
    sections = []
    local_names = [n for n in spec.panel_order if n in b.local]
    global_names = [n for n in spec.panel_order if n in b.global_]
    for i in spec.instances:
        panels = []
        for name in local_names:
            r = b.local[name][i]
            panels.append(_panel(name, "local", RENDERERS[type(r)](r), i, isinstance(r, ErrorRecord)))
        sections.append(f'<section class="instance" id="instance-{i}"><h2>Instance {i}</h2>'
                        f"{_instance_summary(b.instances[i], b.instance_kind)}"
                        f'<div class="panels">{"".join(panels)}</div></section>')
    if global_names:
        panels = []
        for name in global_names:
            body = "".join(RENDERERS[type(r)](r) for r in b.global_[name])
            err = any(isinstance(r, ErrorRecord) for r in b.global_[name])
            panels.append(_panel(name, "global", body, error=err))
        sections.append(f'<section class="global"><h2>Global explanations</h2>'
                        f'<div class="panels">{"".join(panels)}</div></section>')
    meta = b.meta
    footer = (f'<p class="muted">seed {esc(meta.get("seed", ""))}; explainers '
              f'{esc(", ".join(meta.get("explainers", [])))}; version {esc(meta.get("version", ""))}</p>')
    return ("<!doctype html>\n<html lang=\"en\"><head><meta charset=\"utf-8\">"
            f"<title>{html.escape(spec.title)}</title><style>{CSS}</style></head>"
            f"<body><main><h1>{html.escape(spec.title)}</h1>{''.join(sections)}{footer}</main></body></html>\n")
