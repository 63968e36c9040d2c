"""CSV/JSON record emission with round-trip-exact float formatting."""

from __future__ import annotations

import io
import json
from pathlib import Path
from typing import Iterable, Sequence


def format_cell(value) -> str:
    """String form of a cell; floats use repr so parsing reproduces the bits."""
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def csv_text(records: Iterable[dict], columns: Sequence[str]) -> str:
    lines = [",".join(columns)]
    for rec in records:
        lines.append(",".join(format_cell(rec.get(c, "")) for c in columns))
    return "\n".join(lines) + "\n"


def write_csv(records: Iterable[dict], columns: Sequence[str], path) -> None:
    if isinstance(path, io.TextIOBase):
        path.write(csv_text(records, columns))
    else:
        Path(path).write_text(csv_text(records, columns))


def parse_csv(text: str) -> tuple[list[str], list[dict]]:
    """Inverse of :func:`csv_text` for the simple comma-separated records here."""
    lines = [ln for ln in text.splitlines() if ln]
    columns = lines[0].split(",")
    records = []
    for ln in lines[1:]:
        cells = ln.split(",")
        rec = {}
        for c, raw in zip(columns, cells):
            if raw == "":
                rec[c] = ""
                continue
            try:
                num = float(raw)
            except ValueError:
                rec[c] = raw
            else:
                rec[c] = int(num) if raw.lstrip("-").isdigit() else num
        records.append(rec)
    return columns, records


def write_json(records, path) -> None:
    text = json.dumps(records, indent=2, sort_keys=True)
    if isinstance(path, io.TextIOBase):
        path.write(text)
    else:
        Path(path).write_text(text)
