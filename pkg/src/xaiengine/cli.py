"""Command-line interface: ``xaiengine {analyze,train,explain,explain-ts,report}``.

Exit codes: 0 success, 2 usage error, 3 data or schema error, 4 model or
protocol error, 5 some explainer reported "not found" (output still
written). Diagnostics go to stderr only.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .data import TabularBatch, read_csv, read_series_csv
from .engine import REGISTRY, build_set, explain, explain_local
from .errors import CapabilityError, ModelError, ProtocolError, SchemaError, UnknownExplainerError
from .models import fit_detector, load_model, save_model, spawn_external, train_builtin
from .preprocessing import FittedTransform, TransformSpec, fit_transform_spec
from .report import ReportSpec, render_report
from .results import CounterfactualResult, TimeseriesCF
from .serialize import from_json, to_json

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_MODEL, EXIT_NOT_FOUND = 0, 2, 3, 4, 5
ANALYZE_DEFAULT = "correlation,imbalance,feature-selection"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _params(text: str | None) -> dict:
    """``--params`` takes inline JSON or a path to a JSON file."""
    if not text:
        return {}
    try:
        doc = json.loads(text) if text.lstrip().startswith("{") else json.loads(Path(text).read_text("utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"--params: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("--params must be a JSON object")
    return doc


def _seed(arg: int | None) -> int:
    if arg is not None:
        return arg
    env = os.environ.get("XAI_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"XAI_SEED must be an integer, got {env!r}") from None


def _names(text: str) -> list[str]:
    names = [n.strip() for n in text.split(",") if n.strip()]
    if not names:
        raise UsageError("--explainers is empty")
    for n in names:
        if n.lower() not in REGISTRY:
            raise UnknownExplainerError(n, REGISTRY)
    return names


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON: {exc}") from None


def _write(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _outcome(bundle) -> int:
    errors = bundle.errors()
    for e in errors:
        where = "" if e.instance is None else f" (instance {e.instance})"
        print(f"error: {e.explainer}{where}: {e.error_type}: {e.message}", file=sys.stderr)
    if any(e.error_type == "ProtocolError" for e in errors):
        return EXIT_MODEL
    results = [r for rs in list(bundle.local.values()) + list(bundle.global_.values()) for r in rs]
    missing = [r for r in results if isinstance(r, (CounterfactualResult, TimeseriesCF)) and not r.found]
    if missing:
        print(f"note: {len(missing)} counterfactual search(es) found nothing", file=sys.stderr)
        return EXIT_NOT_FOUND
    return EXIT_OK


# -- subcommands ---------------------------------------------------------------


def cmd_analyze(args) -> int:
    schema = _load_json(args.schema) if args.schema else None
    data = read_csv(args.data, schema, args.target)
    params = _params(args.params)
    names = _names(args.explainers)
    seed = _seed(args.seed)
    xset = build_set(names, None, None, data, params=params, seed=seed)
    bundle = explain(xset, None)
    config = {"command": "analyze", "explainers": names, "params": params, "seed": seed}
    _write(to_json(bundle, data, config, zero_timings=not args.timings), args.out)
    return _outcome(bundle)


def cmd_train(args) -> int:
    schema = _load_json(args.schema) if args.schema else None
    data = read_csv(args.data, schema, args.target)
    target = args.target or data.schema.target
    if target is None or target not in data.schema.names:
        raise SchemaError("train needs a target column (--target or the schema's target)")
    params = _params(args.params)
    if target != data.schema.target:
        names = data.schema.names
        data = TabularBatch(data.schema.select(names, target), {n: data.column(n) for n in names}, data.n_rows)
    spec = TransformSpec.from_config(data.schema, params.get("transform"))
    ft = fit_transform_spec(spec, data)
    for w in ft.warnings:
        print(f"warning: {w}", file=sys.stderr)
    targets = data.column(target)
    config = dict(params.get("model", {}))
    config.setdefault("seed", _seed(args.seed))
    if data.schema.kind(target) == "continuous":
        config.setdefault("task", "regression")
    else:
        config.setdefault("labels", list(data.schema.categories[target]))
        if args.kind == "linear":
            raise ModelError("linear models are regression-only; use --kind logistic for a categorical target")
    handle = train_builtin(args.kind, ft.transform(data), list(targets), config)
    doc = save_model(handle)
    doc["transform"] = ft.to_dict()
    doc["target"] = target
    Path(args.out).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    return EXIT_OK


def _model_and_transform(args, train, params):
    if args.model:
        doc = _load_json(args.model)
        handle = load_model(doc)
        ft = FittedTransform.from_dict(doc["transform"]) if "transform" in doc else None
        return handle, ft, {"kind": doc.get("kind")}, None
    # external model: encode with the requested transform, default raw values and ordinal codes
    spec = TransformSpec.from_config(train.schema, params.get("transform") or
                                     {"continuous": "identity", "categorical": "ordinal"})
    ft = fit_transform_spec(spec, train)
    labels = [s for s in args.labels.split(",")] if args.labels else ()
    handle = spawn_external(args.model_cmd, ft.width, labels, args.timeout)
    if labels and len(labels) != handle.n_outputs:
        handle.model.close()
        raise ModelError(f"{len(labels)} labels given for a model with {handle.n_outputs} outputs")
    return handle, ft, {"command": args.model_cmd}, handle.model


def cmd_explain(args) -> int:
    if bool(args.model) == bool(args.model_cmd):
        raise UsageError("explain needs exactly one of --model or --model-cmd")
    names = _names(args.explainers)
    params = _params(args.params)
    seed = _seed(args.seed)
    schema = _load_json(args.schema) if args.schema else None
    train = read_csv(args.data, schema)
    instances = read_csv(args.instances, schema) if args.instances else None
    handle, ft, model_info, external = _model_and_transform(args, train, params)
    try:
        options = {k: v for k, v in params.items() if k not in ("transform", "model")}
        xset = build_set(names, handle, ft, train, params=options, seed=seed)
        bundle = explain(xset, instances)
    finally:
        if external is not None:
            external.close()
    config = {"command": "explain", "explainers": names, "model": model_info, "params": params, "seed": seed}
    _write(to_json(bundle, train, config, zero_timings=not args.timings), args.out)
    return _outcome(bundle)


def cmd_explain_ts(args) -> int:
    names = _names(args.explainers)
    params = _params(args.params)
    seed = _seed(args.seed)
    train = read_series_csv(args.train)
    window = read_series_csv(args.window)
    detector = fit_detector(train, args.kappa)
    xset = build_set(names, detector, None, train, params=params, seed=seed)
    bundle = explain_local(xset, [window])
    config = {"command": "explain-ts", "explainers": names, "kappa": args.kappa, "params": params, "seed": seed}
    dataset = {"points": len(train), "name": train.name}
    _write(to_json(bundle, dataset, config, zero_timings=not args.timings), args.out)
    return _outcome(bundle)


def cmd_report(args) -> int:
    try:
        bundle = from_json(Path(args.bundle).read_text("utf-8"))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(f"{args.bundle}: malformed bundle: {exc}") from None
    html = render_report(ReportSpec(bundle, args.title))
    _write(html, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="xaiengine", description="Explain tabular and time-series models.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, seed=True):
        p.add_argument("--params", help="inline JSON object or path to one")
        p.add_argument("--out", help="output file (default stdout)")
        p.add_argument("--timings", action="store_true", help="keep wall-clock timings (breaks byte-identity)")
        if seed:
            p.add_argument("--seed", type=int, help="random seed (fallback: XAI_SEED, then 0)")

    p = sub.add_parser("analyze", help="data insight bundle")
    p.add_argument("--data", required=True)
    p.add_argument("--schema")
    p.add_argument("--target")
    p.add_argument("--explainers", default=ANALYZE_DEFAULT)
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("train", help="fit a built-in model")
    p.add_argument("--kind", required=True, choices=["linear", "logistic", "tree", "mlp"])
    p.add_argument("--data", required=True)
    p.add_argument("--schema")
    p.add_argument("--target")
    p.add_argument("--params", help="inline JSON or path: {'transform': {...}, 'model': {...}}")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("explain", help="run explainers against a model")
    p.add_argument("--data", required=True, help="training CSV")
    p.add_argument("--schema")
    p.add_argument("--model", help="model JSON written by train")
    p.add_argument("--model-cmd", help="command line of an external model child")
    p.add_argument("--labels", help="comma-separated class labels for an external model")
    p.add_argument("--timeout", type=float, default=60.0, help="external model reply timeout (s)")
    p.add_argument("--explainers", required=True)
    p.add_argument("--instances", help="CSV of rows to explain locally")
    common(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("explain-ts", help="explain a flagged time-series window")
    p.add_argument("--train", required=True)
    p.add_argument("--window", required=True)
    p.add_argument("--kappa", type=float, default=3.0)
    p.add_argument("--explainers", default="ts-shap,ts-ce")
    common(p)
    p.set_defaults(func=cmd_explain_ts)

    p = sub.add_parser("report", help="render a bundle as static HTML")
    p.add_argument("bundle")
    p.add_argument("--out")
    p.add_argument("--title", default="Explanation report")
    p.set_defaults(func=cmd_report)
    return ap


def cli_main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UnknownExplainerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelError, CapabilityError) as exc:
        kind = "protocol" if isinstance(exc, ProtocolError) else "model"
        print(f"{kind} error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (SchemaError, ValueError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
