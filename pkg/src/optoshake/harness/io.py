"""CSV and metadata persistence.

CSV bodies are deterministic: floats use 17 significant digits and the only
header line is the resolved parameter set.  Timestamps and versions go to
the ``metadata.json`` sidecar.
"""
from __future__ import annotations

import csv
import datetime as _dt
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FLOAT_FORMAT = "%.17g"


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % float(value)
    return str(value)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": _jsonable(obj.real), "im": _jsonable(obj.imag)}
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        obj = float(obj)
        # JSON has no inf/nan; spell them out
        return obj if math.isfinite(obj) else repr(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, separators=(",", ":"))


def write_csv(path: str | Path, columns: Sequence[str], rows: Iterable[Sequence],
              params: dict | None = None) -> Path:
    """Write ``rows`` under a ``# params: {...}`` line and a column header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if params is not None:
            fh.write("# params: " + dumps(params) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(v) for v in row])
    return path


def read_csv(path: str | Path) -> tuple[dict | None, list[str], list[list[str]]]:
    """Inverse of :func:`write_csv`; values are returned as strings."""
    params = None
    with Path(path).open(newline="") as fh:
        lines = fh.read().splitlines()
    if lines and lines[0].startswith("# params: "):
        params = json.loads(lines[0][len("# params: "):])
        lines = lines[1:]
    reader = csv.reader(lines)
    header = next(reader)
    return params, header, [row for row in reader]


def code_version() -> str:
    from .. import __version__

    return __version__


def write_metadata(path: str | Path, record: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    full = {"timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "code_version": code_version(), **record}
    path.write_text(json.dumps(_jsonable(full), indent=2, sort_keys=True) + "\n")
    return path
