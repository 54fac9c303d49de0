"""Self-describing CSV and JSON artifacts."""

from __future__ import annotations

import json
import math
import subprocess
from pathlib import Path

import numpy as np

from . import __version__


def describe_version() -> str:
    """``git describe`` of the source tree, or the package version outside git."""
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=Path(__file__).resolve().parent,
            capture_output=True,
            text=True,
            timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return f"{__version__}+g{out.stdout.strip()}"
    except (OSError, subprocess.SubprocessError):
        pass
    return __version__


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "" if math.isnan(x) else repr(x)


def _header_value(v) -> str:
    if isinstance(v, (dict, list, tuple)):
        return json.dumps(v, sort_keys=True, separators=(",", ":"))
    return str(v)


def write_csv(path, header: dict, columns, *data) -> Path:
    """Write ``# key=value`` header lines, a column line, then rows.

    ``data`` holds one array per column; ``None`` (or NaN) entries and
    ``None`` columns are written as empty fields.
    """
    path = Path(path)
    n = len(data[0])
    cols = [[None] * n if c is None else list(c) for c in data]
    if any(len(c) != n for c in cols) or len(cols) != len(columns):
        raise ValueError("columns of unequal length")
    lines = [f"# {k}={_header_value(v)}" for k, v in header.items()]
    lines.append(",".join(columns))
    lines += [",".join(_fmt(c[i]) for c in cols) for i in range(n)]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path):
    """Parse a file written by :func:`write_csv`; returns ``(header, columns, data)``.

    Empty fields become NaN.
    """
    header, rows, columns = {}, [], None
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            header[k] = v
        elif columns is None:
            columns = line.split(",")
        elif line:
            rows.append([float(x) if x else np.nan for x in line.split(",")])
    data = np.array(rows, dtype=float).reshape(len(rows), len(columns or []))
    return header, columns, {c: data[:, i] for i, c in enumerate(columns or [])}


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")
