"""Result tables with a provenance footer, written as CSV."""

from __future__ import annotations

import io
import numbers
from dataclasses import dataclass, field


def fmt(value) -> str:
    if isinstance(value, numbers.Integral):
        return str(int(value))
    return repr(float(value))


@dataclass
class ResultTable:
    columns: list
    rows: list = field(default_factory=list)
    footer: dict = field(default_factory=dict)  # ordered key -> string
    notes: list = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"row has {len(values)} values for {len(self.columns)} columns")
        self.rows.append(tuple(values))

    def column(self, name):
        if name not in self.columns:
            raise KeyError(f"no column {name!r}; have {self.columns}")
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(fmt(v) for v in row) + "\n")
        for note in self.notes:
            buf.write(f"# note: {note}\n")
        for key, value in self.footer.items():
            buf.write(f"# {key}: {value}\n")
        return buf.getvalue()


def parse_csv(text: str) -> ResultTable:
    """Read back a table written by :meth:`ResultTable.to_csv` (numbers as floats)."""
    lines = text.splitlines()
    table = ResultTable(lines[0].split(","))
    for line in lines[1:]:
        if line.startswith("# note: "):
            table.notes.append(line[8:])
        elif line.startswith("# "):
            key, _, value = line[2:].partition(": ")
            table.footer[key] = value
        elif line:
            table.rows.append(tuple(float(v) for v in line.split(",")))
    return table
