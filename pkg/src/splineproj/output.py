"""Deterministic CSV/JSON/text writers.

Every file starts with the format tag ``splineproj-v1`` and an echo of the
run configuration. Floats are written with :func:`repr`, the shortest string
that round-trips, so equal inputs give byte-identical files. Files are
written to a temporary name in the target directory and renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

FORMAT = "splineproj-v1"


def _plain(value: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats to JSON-safe values."""
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return value


def config_line(config: Mapping[str, Any]) -> str:
    return json.dumps(_plain(config), sort_keys=True, separators=(",", ":"))


def comment_block(config: Mapping[str, Any], prefix: str = "# ") -> str:
    return f"{prefix}{FORMAT}\n{prefix}config: {config_line(config)}\n"


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _cell(v: Any) -> str:
    v = _plain(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, list):
        return ";".join(_cell(x) for x in v)
    return str(v)


def write_csv(path, config: Mapping[str, Any], columns: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    buf = io.StringIO()
    buf.write(comment_block(config))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return atomic_write(path, buf.getvalue())


def write_json(path, config: Mapping[str, Any], payload: Mapping[str, Any]) -> Path:
    doc = {"format": FORMAT, "config": _plain(config), **_plain(payload)}
    return atomic_write(path, json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n")


def write_matrix(path, config: Mapping[str, Any], m: np.ndarray) -> Path:
    buf = io.StringIO()
    buf.write(comment_block(config))
    for row in np.atleast_2d(m):
        buf.write(" ".join(repr(float(v)) for v in row) + "\n")
    return atomic_write(path, buf.getvalue())


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Header and rows of a file written by :func:`write_csv` (comment lines skipped)."""
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    return rows[0], rows[1:]
