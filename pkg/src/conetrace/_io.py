"""Deterministic text output: fixed float formatting, stable keys, provenance stamps."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

from . import __version__

__all__ = ["format_number", "dumps_canonical", "config_hash", "write_csv", "write_json", "read_csv"]

SIGNIFICANT_DIGITS = 17


def format_number(x) -> str:
    """Text for a real number with 17 significant digits (``inf``/``nan`` spelled out)."""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int) or (hasattr(x, "dtype") and getattr(x.dtype, "kind", "") in "iu"):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x == 0.0:
        return "0"  # also folds -0.0 so that signed zeros cannot break byte equality
    return format(x, f".{SIGNIFICANT_DIGITS}g")


def _plain(obj):
    """Convert numpy scalars, tuples and complex values to JSON-ready objects."""
    if hasattr(obj, "tolist") and not isinstance(obj, (str, bytes)):
        obj = obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _emit(obj, indent: int, level: int, out: list) -> None:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(format_number(obj) if math.isfinite(obj) else json.dumps(format_number(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        for i, key in enumerate(sorted(obj)):
            out.append(f"{pad}{json.dumps(key, ensure_ascii=False)}: ")
            _emit(obj[key], indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, list):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, item in enumerate(obj):
            out.append(pad)
            _emit(item, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_canonical(obj, indent: int = 2) -> str:
    """JSON text with sorted keys and 17-digit floats; non-finite floats become strings."""
    out: list[str] = []
    _emit(_plain(obj), indent, 0, out)
    return "".join(out) + "\n"


def config_hash(config: dict) -> str:
    """SHA-256 of the compact canonical JSON form of ``config``."""
    text = json.dumps(_plain(config), sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def write_csv(path, header, rows, digest: str) -> Path:
    """Write a CSV whose first line is a ``#`` comment with version and config hash."""
    path = Path(path)
    buf = io.StringIO()
    buf.write(f"# conetrace {__version__} config_sha256={digest}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([v if isinstance(v, str) else format_number(v) for v in row])
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path


def write_json(path, payload: dict, digest: str) -> Path:
    """Write ``payload`` plus ``config_sha256`` and ``version`` keys as canonical JSON."""
    path = Path(path)
    body = dict(payload)
    body["config_sha256"] = digest
    body["version"] = __version__
    path.write_text(dumps_canonical(body), encoding="utf-8")
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Header and rows of a CSV written by :func:`write_csv` (comment lines skipped)."""
    text = Path(path).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.reader(lines)
    header = next(reader)
    return header, [row for row in reader]
