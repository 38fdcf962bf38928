"""Canonical JSON for explanation bundles."""

from __future__ import annotations

import hashlib
import json
from importlib import resources
from typing import Mapping

from .data import TabularBatch, write_csv
from .engine import ExplanationBundle
from .errors import SchemaError

SCHEMA_VERSION = "1"


def dataset_fingerprint(batch: TabularBatch | None) -> dict | None:
    if batch is None:
        return None
    digest = hashlib.sha256(write_csv(batch).encode("utf-8")).hexdigest()
    return {"rows": batch.n_rows, "columns": batch.schema.names, "sha256": digest}


def canonical(doc) -> str:
    """Sorted keys, shortest round-trip floats, UTF-8 text, trailing newline."""
    return json.dumps(doc, sort_keys=True, ensure_ascii=False, allow_nan=False, indent=1) + "\n"


def bundle_document(bundle: ExplanationBundle, dataset: TabularBatch | dict | None = None,
                    config: Mapping | None = None, zero_timings: bool = False) -> dict:
    doc = bundle.to_dict()
    if zero_timings:
        doc["meta"] = dict(doc["meta"])
        doc["meta"]["timings"] = {k: 0.0 for k in doc["meta"].get("timings", {})}
    doc["schema_version"] = SCHEMA_VERSION
    doc["dataset"] = dataset if isinstance(dataset, dict) or dataset is None else dataset_fingerprint(dataset)
    doc["config"] = dict(config or {})
    return doc


def to_json(bundle: ExplanationBundle, dataset=None, config: Mapping | None = None,
            zero_timings: bool = False) -> str:
    return canonical(bundle_document(bundle, dataset, config, zero_timings))


def parse_document(text: str) -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"bundle is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"unrecognized bundle schema_version {doc.get('schema_version') if isinstance(doc, dict) else None!r}")
    return doc


def from_json(text: str) -> ExplanationBundle:
    return ExplanationBundle.from_dict(parse_document(text))


def document_to_json(doc: Mapping) -> str:
    """Re-canonicalize a parsed document (``to_json`` -> parse -> this is a fixpoint)."""
    return canonical(doc)


def bundle_schema() -> dict:
    return json.loads(resources.files("xaiengine").joinpath("bundle.schema.json").read_text("utf-8"))


def validate_document(doc: Mapping) -> None:
    import jsonschema

    jsonschema.validate(doc, bundle_schema())
