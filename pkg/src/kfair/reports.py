"""JSON schemas shipped with the package and validation against them."""

import json
from functools import lru_cache
from importlib import resources

import jsonschema

from .exceptions import InputError

KINDS = ("certificate", "search_report", "explanation", "mitigation_report", "guards",
         "manifest")


@lru_cache(maxsize=None)
def load_report_schema(kind):
    if kind not in KINDS:
        raise InputError(f"unknown report kind {kind!r}")
    text = resources.files("kfair").joinpath("schemas", f"{kind}.json").read_text("utf-8")
    return json.loads(text)


def validate_report(doc, kind=None):
    """Raise InputError unless ``doc`` matches the schema of its ``kind``."""
    kind = kind or (doc.get("kind") if isinstance(doc, dict) else None)
    if kind is None:
        raise InputError("report has no 'kind' field")
    try:
        jsonschema.validate(doc, load_report_schema(kind))
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise InputError(f"{kind} report invalid at '{path}': {exc.message}") from None
