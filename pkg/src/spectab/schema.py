"""Table schemas, typed in-memory tables, and CSV input/output.

The schema is a YAML document declaring the column order, per-column kind
(continuous / categorical / mixed / minmax), category vocabularies, special
values and missing-value handling for mixed columns, optional min-max bounds
overrides, and at most one target column::

    missing_token: ""            # optional, default empty field
    columns:
      - name: amount
        kind: continuous
        max_modes: 10            # optional cap for the mixture fit
      - name: status
        kind: categorical
        categories: [open, closed]
        target: classification   # or regression (continuous/minmax targets)
      - name: balance
        kind: mixed
        specials: [-1.0]
        missing: true            # reserve a slot for missing entries
      - name: region_code
        kind: minmax
        categories: [north, south, east, west]   # integer-code workaround
      - name: score
        kind: minmax
        bounds: [0.0, 100.0]     # optional; defaults to observed min/max

Column types are declared, never inferred.  High-cardinality categorical
columns can be declared ``minmax`` with a vocabulary: values are mapped to
their integer code and min-max scaled, which keeps the encoded width at 1.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .errors import DataError, SchemaError

KINDS = ("continuous", "categorical", "mixed", "minmax")
TASKS = ("classification", "regression")


@dataclass
class ColumnSpec:
    name: str
    kind: str
    categories: list[str] | None = None
    specials: list[float] | None = None
    missing: bool = False
    bounds: tuple[float, float] | None = None
    max_modes: int | None = None
    target_task: str | None = None

    @property
    def numeric(self) -> bool:
        """True when raw cell values parse as floats."""
        return self.kind in ("continuous", "mixed") or (self.kind == "minmax" and self.categories is None)

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise SchemaError(f"column {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == "categorical" and not self.categories:
            raise SchemaError(f"column {self.name!r}: categorical column needs a non-empty vocabulary")
        if self.categories is not None:
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"column {self.name!r}: duplicate categories")
            if self.kind in ("continuous", "mixed"):
                raise SchemaError(f"column {self.name!r}: {self.kind} column cannot carry a vocabulary")
        if self.kind == "mixed" and not (self.specials or self.missing):
            raise SchemaError(f"column {self.name!r}: mixed column needs special values (or missing: true)")
        if self.specials is not None and self.kind != "mixed":
            raise SchemaError(f"column {self.name!r}: special values are only valid on mixed columns")
        if self.missing and self.kind != "mixed":
            raise SchemaError(f"column {self.name!r}: missing values are owned by the mixed encoder")
        if self.bounds is not None:
            if self.kind != "minmax":
                raise SchemaError(f"column {self.name!r}: bounds override is only valid on minmax columns")
            if not self.bounds[1] >= self.bounds[0]:
                raise SchemaError(f"column {self.name!r}: bounds must satisfy hi >= lo")
        if self.target_task is not None:
            if self.target_task not in TASKS:
                raise SchemaError(f"column {self.name!r}: unknown task {self.target_task!r}")
            if self.target_task == "classification" and self.kind != "categorical":
                raise SchemaError(f"column {self.name!r}: classification target must be categorical")
            if self.target_task == "regression" and self.kind not in ("continuous", "minmax"):
                raise SchemaError(f"column {self.name!r}: regression target must be continuous or minmax")

    def to_dict(self) -> dict:
        out: dict = {"name": self.name, "kind": self.kind}
        if self.categories is not None:
            out["categories"] = list(self.categories)
        if self.specials:
            out["specials"] = [float(s) for s in self.specials]
        if self.missing:
            out["missing"] = True
        if self.bounds is not None:
            out["bounds"] = [float(self.bounds[0]), float(self.bounds[1])]
        if self.max_modes is not None:
            out["max_modes"] = int(self.max_modes)
        if self.target_task is not None:
            out["target"] = self.target_task
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ColumnSpec":
        known = {"name", "kind", "categories", "specials", "missing", "bounds", "max_modes", "target"}
        unknown = set(d) - known
        if unknown:
            raise SchemaError(f"column {d.get('name', '?')!r}: unknown keys {sorted(unknown)}")
        if "name" not in d or "kind" not in d:
            raise SchemaError(f"column entry needs 'name' and 'kind': {d}")
        spec = cls(
            name=str(d["name"]),
            kind=str(d["kind"]),
            categories=[str(c) for c in d["categories"]] if d.get("categories") is not None else None,
            specials=[float(s) for s in d["specials"]] if d.get("specials") is not None else None,
            missing=bool(d.get("missing", False)),
            bounds=tuple(float(b) for b in d["bounds"]) if d.get("bounds") is not None else None,
            max_modes=int(d["max_modes"]) if d.get("max_modes") is not None else None,
            target_task=str(d["target"]) if d.get("target") is not None else None,
        )
        spec.validate()
        return spec


@dataclass
class TableSchema:
    columns: list[ColumnSpec]
    missing_token: str = ""

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("column names must be unique")
        targets = [c for c in self.columns if c.target_task is not None]
        if len(targets) > 1:
            raise SchemaError("at most one target column is allowed")
        for c in self.columns:
            c.validate()

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    @property
    def target(self) -> tuple[int, str] | None:
        """(column index, task) of the target column, if any."""
        for i, c in enumerate(self.columns):
            if c.target_task is not None:
                return i, c.target_task
        return None

    def column(self, name: str) -> ColumnSpec:
        for c in self.columns:
            if c.name == name:
                return c
        raise SchemaError(f"no column named {name!r}")

    def index_of(self, name: str) -> int:
        for i, c in enumerate(self.columns):
            if c.name == name:
                return i
        raise SchemaError(f"no column named {name!r}")

    def permuted(self, order: list[int]) -> "TableSchema":
        if sorted(order) != list(range(len(self.columns))):
            raise SchemaError(f"invalid permutation {order}")
        return TableSchema([self.columns[i] for i in order], self.missing_token)

    def to_dict(self) -> dict:
        d: dict = {"columns": [c.to_dict() for c in self.columns]}
        if self.missing_token:
            d["missing_token"] = self.missing_token
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TableSchema":
        if not isinstance(d, dict) or "columns" not in d:
            raise SchemaError("schema document needs a top-level 'columns' list")
        unknown = set(d) - {"columns", "missing_token"}
        if unknown:
            raise SchemaError(f"unknown schema keys {sorted(unknown)}")
        cols = [ColumnSpec.from_dict(c) for c in d["columns"]]
        return cls(cols, missing_token=str(d.get("missing_token", "")))

    @classmethod
    def load(cls, path) -> "TableSchema":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise SchemaError(f"cannot parse schema file {path}: {exc}") from exc
        return cls.from_dict(doc)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            yaml.safe_dump(self.to_dict(), fh, sort_keys=False)

    def hash(self) -> str:
        """sha256 of the canonical schema content (whitespace-insensitive)."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class Table:
    """Column store bound to a schema; numeric columns are float64 arrays,
    categorical (and coded-minmax) columns are lists of strings."""

    def __init__(self, schema: TableSchema, columns: dict):
        self.schema = schema
        self.columns = columns
        lengths = {len(v) for v in columns.values()}
        if set(columns) != set(schema.names):
            raise DataError("table columns do not match schema")
        if len(lengths) > 1:
            raise DataError(f"ragged columns: lengths {sorted(lengths)}")
        self.n_rows = lengths.pop() if lengths else 0

    def __len__(self) -> int:
        return self.n_rows

    def column(self, name: str):
        return self.columns[name]

    def take(self, indices) -> "Table":
        indices = np.asarray(indices)
        cols = {}
        for c in self.schema.columns:
            v = self.columns[c.name]
            if isinstance(v, np.ndarray):
                cols[c.name] = v[indices]
            else:
                cols[c.name] = [v[i] for i in indices]
        return Table(self.schema, cols)

    def permuted(self, order: list[int]) -> "Table":
        schema = self.schema.permuted(order)
        return Table(schema, {c.name: self.columns[c.name] for c in schema.columns})

    def row(self, i: int) -> list:
        return [self.columns[c.name][i] for c in self.schema.columns]


def _parse_numeric(raw: str, col: ColumnSpec, missing_token: str, row: int) -> float:
    if raw == missing_token:
        if col.kind == "mixed" and col.missing:
            return math.nan
        raise DataError(f"row {row}, column {col.name!r}: missing value not allowed")
    try:
        value = float(raw)
    except ValueError as exc:
        raise DataError(f"row {row}, column {col.name!r}: {raw!r} is not a number") from exc
    if not math.isfinite(value):
        raise DataError(f"row {row}, column {col.name!r}: non-finite value {raw!r}")
    return value


def read_csv(path, schema: TableSchema) -> Table:
    """Parse a CSV file under a schema.

    The header row must contain every schema column (extra columns are an
    error); cells are typed per column kind.  Errors carry the 1-based data
    row index.
    """
    path = Path(path)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if sorted(header) != sorted(schema.names):
            raise DataError(
                f"{path}: header {header} does not match schema columns {schema.names}"
            )
        positions = {name: header.index(name) for name in schema.names}
        raw_columns: dict[str, list] = {name: [] for name in schema.names}
        width = len(header)
        for row_idx, row in enumerate(reader, start=1):
            if len(row) != width:
                raise DataError(f"{path}: row {row_idx} has {len(row)} fields, expected {width}")
            for col in schema.columns:
                raw = row[positions[col.name]]
                if col.numeric:
                    raw_columns[col.name].append(_parse_numeric(raw, col, schema.missing_token, row_idx))
                else:
                    raw_columns[col.name].append(raw)
        columns: dict = {}
        for col in schema.columns:
            if col.numeric:
                columns[col.name] = np.asarray(raw_columns[col.name], dtype=np.float64)
            else:
                columns[col.name] = raw_columns[col.name]
    return Table(schema, columns)


def _format_cell(value, col: ColumnSpec, missing_token: str) -> str:
    if col.numeric:
        v = float(value)
        if math.isnan(v):
            return missing_token
        return repr(v)
    return str(value)


def write_csv(path, table: Table) -> None:
    schema = table.schema
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(schema.names)
        for i in range(table.n_rows):
            writer.writerow(
                _format_cell(table.columns[c.name][i], c, schema.missing_token)
                for c in schema.columns
            )
