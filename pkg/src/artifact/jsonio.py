"""Deterministic JSON serialization: sorted keys, floats at 17 significant digits.

Every float is written with the "%.17g" format, which round-trips IEEE
doubles exactly, so re-serializing a parsed document reproduces it byte for
byte. Non-finite floats are rejected: all persisted quantities are expected
to be finite, and NaN/Inf are not valid JSON anyway.
"""

from __future__ import annotations

import json

import numpy as np

__all__ = ["dumps", "loads", "dump_path", "load_path"]


def _format(obj, parts: list) -> None:
    if obj is None:
        parts.append("null")
    elif obj is True:
        parts.append("true")
    elif obj is False:
        parts.append("false")
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    elif isinstance(obj, (int, np.integer)):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not np.isfinite(v):
            raise ValueError("non-finite float in JSON output")
        parts.append(format(v, ".17g"))
    elif isinstance(obj, np.ndarray):
        _format(obj.tolist(), parts)
    elif isinstance(obj, (list, tuple)):
        parts.append("[")
        for i, v in enumerate(obj):
            if i:
                parts.append(", ")
            _format(v, parts)
        parts.append("]")
    elif isinstance(obj, dict):
        parts.append("{")
        for i, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise TypeError("JSON object keys must be strings")
            if i:
                parts.append(", ")
            parts.append(json.dumps(key))
            parts.append(": ")
            _format(obj[key], parts)
        parts.append("}")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} to JSON")


def dumps(obj) -> str:
    parts: list = []
    _format(obj, parts)
    return "".join(parts)


def loads(text: str):
    return json.loads(text)


def dump_path(obj, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps(obj))
        fh.write("\n")


def load_path(path):
    with open(path) as fh:
        return json.loads(fh.read())
