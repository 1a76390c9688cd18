"""Bit-stable CSV emission.

Reals are printed with 17 significant digits (lossless for doubles), line
endings are LF, and no locale formatting is involved, so identical records
always produce byte-identical files.
"""

from __future__ import annotations

import os
from typing import Iterable, Sequence

import numpy as np

from .errors import IoFailure


def format_value(value) -> str:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.17g}"
    if isinstance(value, int):
        return str(value)
    text = str(value)
    if any(ch in text for ch in (",", '"', "\n", "\r")):
        text = '"' + text.replace('"', '""') + '"'
    return text


def emit_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Write header + rows as RFC-4180-style CSV with LF line endings."""
    lines = [",".join(format_value(h) for h in header)]
    for row in rows:
        lines.append(",".join(format_value(v) for v in row))
    data = "\n".join(lines) + "\n"
    try:
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(data)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
