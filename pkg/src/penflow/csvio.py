"""Deterministic CSV emission for study artifacts.

Files start with a ``#schema:`` comment line naming the column layout,
followed by the header row and numeric rows.  Floats are serialized in
shortest round-trip form (17 significant digits where needed), line endings
are LF and there is no trailing delimiter, so identical tables produce
byte-identical files on every platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ValidationError


def format_number(x) -> str:
    """Shortest round-trip decimal form of one numeric cell."""
    if isinstance(x, (bool, np.bool_)):
        raise ValidationError("CSV cells must be numbers, got a boolean")
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        v = float(x)
        if not math.isfinite(v):
            raise ValidationError(f"CSV cells must be finite, got {v}")
        return repr(v)
    raise ValidationError(f"CSV cells must be numbers, got {type(x).__name__}")


@dataclass(frozen=True)
class CSVTable:
    """Rectangular numeric table with a schema tag."""

    schema: str
    columns: tuple[str, ...]
    rows: tuple[tuple, ...]

    def __post_init__(self):
        if not self.schema or "\n" in self.schema:
            raise ValidationError("schema tag must be a nonempty single line")
        columns = tuple(str(c) for c in self.columns)
        if not columns or any("," in c or "\n" in c for c in columns):
            raise ValidationError("column names must be nonempty and delimiter-free")
        rows = tuple(tuple(r) for r in self.rows)
        if any(len(r) != len(columns) for r in rows):
            raise ValidationError("all rows must match the header width")
        object.__setattr__(self, "columns", columns)
        object.__setattr__(self, "rows", rows)


def table_text(table: CSVTable) -> str:
    lines = [f"#schema: {table.schema}", ",".join(table.columns)]
    for row in table.rows:
        lines.append(",".join(format_number(x) for x in row))
    return "\n".join(lines) + "\n"


def write_csv(table: CSVTable, path: str | Path) -> None:
    """Write the table; identical tables yield byte-identical files."""
    Path(path).write_text(table_text(table), encoding="utf-8", newline="\n")


def from_arrays(schema: str, columns: Sequence[str], arrays: Sequence) -> CSVTable:
    """Assemble a table from one array per column."""
    cols = [np.asarray(a) for a in arrays]
    if len(cols) != len(columns):
        raise ValidationError("one array per column required")
    n = {c.shape[0] for c in cols}
    if len(n) > 1:
        raise ValidationError(f"column lengths differ: {sorted(n)}")
    rows = tuple(tuple(c[i].item() for c in cols) for i in range(n.pop() if n else 0))
    return CSVTable(schema=schema, columns=tuple(columns), rows=rows)
