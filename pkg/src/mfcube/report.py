"""Deterministic command reports: canonical JSON payloads and a plain text view."""
from __future__ import annotations

import dataclasses
import json
import logging
from collections.abc import Mapping
from pathlib import Path

import numpy as np

from .cubecore import VertexSet
from .fileio import canonical_json, digest

LOGGER_NAME = "mfcube"


def jsonable(obj):
    """Convert library results into JSON-ready values with a fixed order."""
    if isinstance(obj, VertexSet):
        return sorted(jsonable(v) for v in obj.members)
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        if hasattr(obj, "as_dict"):
            return jsonable(obj.as_dict())
        return {f.name: jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, Mapping):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (set, frozenset)):
        return sorted((jsonable(v) for v in obj), key=canonical_json)
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    return repr(obj)


@dataclasses.dataclass
class Report:
    command: list
    inputs: dict
    config: dict
    results: dict
    caveats: list
    trace: list = None

    def payload(self) -> dict:
        out = {
            "command": list(self.command),
            "inputs": dict(self.inputs),
            "config": self.config,
            "results": self.results,
            "caveats": list(self.caveats),
        }
        if self.trace is not None:
            out["trace"] = list(self.trace)
        return jsonable(out)

    def to_json(self) -> str:
        return canonical_json(self.payload())

    def to_text(self) -> str:
        lines = [f"command: {' '.join(self.command)}"]
        for path, dig in sorted(self.inputs.items()):
            lines.append(f"input: {path} sha256={dig[:16]}")
        lines.extend(_flatten("", jsonable(self.results)))
        for c in self.caveats:
            lines.append(f"caveat: {c}")
        for t in self.trace or ():
            lines.append(f"trace: {t}")
        return "\n".join(lines) + "\n"


def _flatten(prefix, value):
    if isinstance(value, dict) and value:
        for k in sorted(value):
            yield from _flatten(f"{prefix}.{k}" if prefix else k, value[k])
    elif isinstance(value, list) and any(isinstance(v, dict) for v in value):
        for i, v in enumerate(value):
            yield from _flatten(f"{prefix}[{i}]", v)
    elif isinstance(value, (dict, list)):
        yield f"{prefix}: {json.dumps(value, sort_keys=True, separators=(',', ':'))}"
    else:
        yield f"{prefix}: {value}"


def input_digests(paths) -> dict:
    """sha256 of every input file, keyed by file name."""
    out = {}
    for p in paths:
        p = Path(p)
        out[p.name] = digest(p)
    return out


class TraceCollector(logging.Handler):
    """Collect debug records from the library loggers, in emission order."""

    def __init__(self):
        super().__init__(logging.DEBUG)
        self.lines = []

    def emit(self, record):
        self.lines.append(f"{record.name.split('.')[-1]}: {record.getMessage()}")

    def __enter__(self):
        log = logging.getLogger(LOGGER_NAME)
        self._level = log.level
        log.setLevel(logging.DEBUG)
        log.addHandler(self)
        return self

    def __exit__(self, *exc):
        log = logging.getLogger(LOGGER_NAME)
        log.removeHandler(self)
        log.setLevel(self._level)
        return False
