"""Deterministic report documents and their canonical JSON encoding.

Reports are plain dictionaries with the shape

    {version, input_digest, checks: [{name, paper_anchor, max_residual,
     tolerance, pass, points}], verdict}

plus optional extras (classification flags, per-query records, profile
tables).  The serializer sorts keys and prints every float with 17
significant digits, so identical seed and configuration produce
byte-identical files; the shipped report_schema.json validates the layout.
"""

from __future__ import annotations

import hashlib
import importlib.resources
import json
import math
from pathlib import Path

import numpy as np

REPORT_VERSION = "0.1.0"

__all__ = [
    "REPORT_VERSION", "input_digest", "check_entry", "build_document",
    "canonical_json", "write_report", "schema_text",
]


def input_digest(text: str) -> str:
    """Stable content digest of the input definition."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def check_entry(name: str, anchor: str, max_residual: float, tolerance: float,
                passed: bool, points: int) -> dict:
    return {
        "name": name,
        "paper_anchor": anchor,
        "max_residual": float(max_residual),
        "tolerance": float(tolerance),
        "pass": bool(passed),
        "points": int(points),
    }


def build_document(digest: str, checks: list[dict], **extras) -> dict:
    doc = {
        "version": REPORT_VERSION,
        "input_digest": digest,
        "checks": checks,
        "verdict": "pass" if all(c["pass"] for c in checks) else "fail",
    }
    for key, value in extras.items():
        if value is not None:
            doc[key] = value
    return doc


def _encode(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return "null"
        return format(x, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = sorted(obj.items())
        return "{" + ", ".join(f"{json.dumps(k)}: {_encode(v)}" for k, v in items) + "}"
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot encode {type(obj).__name__} in a report")


def canonical_json(doc) -> str:
    """Sorted keys, 17-significant-digit floats, newline-terminated."""
    return _encode(doc) + "\n"


def write_report(doc, path) -> None:
    Path(path).write_text(canonical_json(doc), encoding="utf-8")


def schema_text() -> str:
    res = importlib.resources.files("cgsys").joinpath("report_schema.json")
    return res.read_text(encoding="utf-8")
