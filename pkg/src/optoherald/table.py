"""Rectangular result tables with byte-stable CSV and JSON serialisation.

Cells hold floats, ints, strings or None (absent). Floats are written with
``repr``, the shortest decimal string that parses back to the same double,
so a write/read cycle reproduces the table exactly.
"""

from dataclasses import dataclass, field
import csv
import io
import json
import math
import re

_INT = re.compile(r"[+-]?\d+\Z")
_FLOAT = re.compile(r"[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?\Z|[+-]?(inf|nan)\Z")


def _cell_text(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_cell(text: str):
    if text == "":
        return None
    if _INT.match(text):
        return int(text)
    if _FLOAT.match(text):
        return float(text)
    return text


def _json_cell(v):
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


@dataclass
class ResultTable:
    columns: list[str]
    rows: list[tuple] = field(default_factory=list)
    metadata: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("duplicate column names")
        n = len(self.columns)
        self.rows = [tuple(r) for r in self.rows]
        for r in self.rows:
            if len(r) != n:
                raise ValueError(f"row has {len(r)} cells, expected {n}")
        self.metadata = {str(k): str(v) for k, v in self.metadata.items()}

    def __len__(self):
        return len(self.rows)

    def column(self, name: str) -> list:
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def sort_by(self, names: list[str]) -> "ResultTable":
        idx = [self.columns.index(n) for n in names]
        rows = sorted(self.rows, key=lambda r: tuple(r[i] for i in idx))
        return ResultTable(list(self.columns), rows, dict(self.metadata))

    def to_csv(self) -> str:
        buf = io.StringIO()
        for k, v in self.metadata.items():
            buf.write(f"# {k}: {v}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for r in self.rows:
            w.writerow([_cell_text(v) for v in r])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ResultTable":
        lines = text.split("\n")
        meta = {}
        i = 0
        while i < len(lines) and lines[i].startswith("#"):
            key, _, value = lines[i][1:].strip().partition(": ")
            meta[key] = value
            i += 1
        reader = csv.reader(io.StringIO("\n".join(lines[i:])))
        header = next(reader)
        rows = [tuple(_parse_cell(c) for c in rec) for rec in reader if rec]
        return cls(header, rows, meta)

    def to_json(self) -> str:
        doc = {
            "metadata": self.metadata,
            "columns": self.columns,
            "rows": [[_json_cell(v) for v in r] for r in self.rows],
        }
        return json.dumps(doc, indent=1, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ResultTable":
        doc = json.loads(text)
        rows = []
        for r in doc["rows"]:
            rows.append(tuple(float(v) if v in ("inf", "-inf", "nan") else v for v in r))
        return cls(doc["columns"], rows, doc["metadata"])

    def dumps(self, fmt: str) -> str:
        if fmt == "csv":
            return self.to_csv()
        if fmt == "json":
            return self.to_json()
        raise ValueError(f"unknown output format {fmt!r}")

    def write(self, path, fmt: str = "csv") -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.dumps(fmt))
