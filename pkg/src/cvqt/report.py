"""Serializable experiment reports (JSON and CSV)."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any

SCHEMA_VERSION = 1
SIGNIFICANT_DIGITS = 12


def canonical(value: Any) -> Any:
    """Round floats to 12 significant digits and turn containers into plain JSON types."""
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, int) and not isinstance(value, bool):
        return value
    if hasattr(value, "item") and getattr(value, "shape", None) == ():
        return canonical(value.item())
    if isinstance(value, complex):
        return [canonical(value.real), canonical(value.imag)]
    if isinstance(value, float):
        if not math.isfinite(value):
            return None
        rounded = float(f"{value:.{SIGNIFICANT_DIGITS}g}")
        return 0.0 if rounded == 0 else rounded
    if isinstance(value, dict):
        return {str(k): canonical(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [canonical(v) for v in value]
    if hasattr(value, "tolist"):
        return canonical(value.tolist())
    raise TypeError(f"cannot serialize {type(value).__name__}")


def format_number(value: Any) -> str:
    value = canonical(value)
    if isinstance(value, float):
        return repr(value)
    return "" if value is None else str(value)


@dataclass
class ExperimentReport:
    experiment: str
    config: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "config": canonical(self.config),
            "metrics": canonical(self.metrics),
            "tables": canonical(self.tables),
            "provenance": canonical({"schema_version": SCHEMA_VERSION, **self.provenance}),
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ExperimentReport":
        data = json.loads(text)
        return cls(data["experiment"], data["config"], data["metrics"], data["tables"], data["provenance"])

    def to_csv(self, table: str | None = None) -> str:
        """One table as CSV, or the scalar metrics as ``metric,value`` rows."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        if table is None:
            writer.writerow(["metric", "value"])
            for key, value in canonical(self.metrics).items():
                writer.writerow([key, format_number(value)])
            return buf.getvalue()
        rows = self.tables[table]
        header = list(rows[0]) if rows else []
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(row[k]) for k in header])
        return buf.getvalue()

    def summary_lines(self) -> list[str]:
        return [f"{key} = {format_number(value)}" for key, value in canonical(self.metrics).items()]
