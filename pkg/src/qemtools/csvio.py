"""Deterministic CSV and JSON emission.

Each CSV starts with one ``#`` metadata line, then a header row.  Floats
are written with 12 significant digits and rows are sorted by the caller,
so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

from . import __version__


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return f"{v:.12g}"
    return str(v)


def metadata_line(seed: int, config_hash: str, **extra: Any) -> str:
    parts = [f"qemtools={__version__}", f"seed={seed}", f"config={config_hash}"]
    parts += [f"{k}={format_value(v)}" for k, v in sorted(extra.items())]
    return "# " + " ".join(parts)


def write_csv(
    path: str | Path,
    columns: Sequence[str],
    rows: Iterable[Mapping[str, Any]],
    meta: str,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    buf.write(meta + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(row.get(c, "")) for c in columns])
    path.write_text(buf.getvalue())
    return path


def read_csv(path: str | Path) -> tuple[str, list[dict[str, str]]]:
    """Return ``(metadata line, rows)``; raises ``ValueError`` on malformed input."""
    text = Path(path).read_text()
    lines = text.splitlines()
    meta = ""
    if lines and lines[0].startswith("#"):
        meta, lines = lines[0], lines[1:]
    if not lines:
        raise ValueError(f"{path}: missing header row")
    reader = csv.DictReader(lines)
    rows = list(reader)
    for i, row in enumerate(rows, start=3 if meta else 2):
        if None in row or any(v is None for v in row.values()):
            raise ValueError(f"{path}:{i}: wrong number of fields")
    return meta, rows


def write_json(path: str | Path, payload: Mapping[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path
