"""Plain-text configuration and CSV output.

Configuration files are flat ``key = value`` lines; ``#`` starts a comment.
Every CSV starts with ``#`` comment lines holding the tool version and the
resolved configuration, so a run can be repeated from its own output.
Floats are written in shortest round-trip form and files are replaced
atomically.
"""

from __future__ import annotations

import csv
import io
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError


def format_value(x) -> str:
    """Shortest text that reads back to the same value."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return repr(x)
    if x is None:
        return ""
    return str(x)


def read_config(path) -> dict[str, str]:
    """Parse a flat ``key = value`` file into raw strings."""
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        if key in out:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def header_lines(config: dict) -> list[str]:
    lines = [f"# spinamp {__version__}"]
    lines += [f"# {k} = {format_value(v)}" for k, v in config.items()]
    return lines


def render_csv(columns, rows, config: dict | None = None,
               trailer: list[str] | None = None) -> str:
    buf = io.StringIO()
    for line in header_lines(config or {}):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    for line in trailer or []:
        buf.write(f"# {line}\n")
    return buf.getvalue()


def write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` (``-`` or None for stdout), atomically."""
    if path in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def read_csv(path) -> tuple[dict[str, str], list[str], np.ndarray]:
    """Header config, column names and float data of a file written here."""
    config: dict[str, str] = {}
    body = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if sep:
                config[key.strip()] = value.strip()
        elif line:
            body.append(line)
    columns = body[0].split(",")
    data = np.array([[float(v) for v in r.split(",")] for r in body[1:]], float)
    return config, columns, data.reshape(-1, len(columns))
