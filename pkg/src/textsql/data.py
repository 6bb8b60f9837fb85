"""Ingestion and validation of WikiSQL-format question and table files.

Both inputs are newline-delimited JSON. The tables file carries one object
per line with keys ``id``, ``header``, ``types``, ``rows``; the questions
file carries ``phase``, ``table_id``, ``question``, and ``sql`` (an object
with ``sel``, ``agg``, ``conds``).

Loading is single-threaded per file. Loaded objects are frozen and may be
shared freely across threads afterward.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

COLUMN_TYPES = ("text", "real")

# Canonical WikiSQL aggregation and operator tables. Index 0 renders no
# aggregation; operator index 3 ("OP") is accepted at load time but rejected
# by the composer because it never appears in valid annotations.
AGG_NAMES = ("", "max", "min", "count", "sum", "avg")
AGG_NONE, AGG_MAX, AGG_MIN, AGG_COUNT, AGG_SUM, AGG_AVG = range(6)
OP_NAMES = ("=", ">", "<", "OP")
OP_EQ, OP_GT, OP_LT, OP_OTHER = range(4)

Cell = str | int | float | None


class DataFormatError(ValueError):
    """A malformed input file; carries the path and 1-based line number."""

    def __init__(self, message: str, path: str | Path | None = None, line: int | None = None):
        self.path = str(path) if path is not None else None
        self.line = line
        where = ""
        if self.path is not None:
            where = f"{self.path}"
            if line is not None:
                where += f":{line}"
            where = f" ({where})"
        super().__init__(f"{message}{where}")


@dataclass(frozen=True)
class Table:
    """A single source table: id, column names, column types, and row data."""

    table_id: str
    headers: tuple[str, ...]
    col_types: tuple[str, ...]
    rows: tuple[tuple[Cell, ...], ...]

    def __post_init__(self):
        if not self.table_id:
            raise ValueError("table_id must be non-empty")
        if not all(isinstance(h, str) and h for h in self.headers):
            raise ValueError("headers must be non-empty strings")
        if len(self.headers) != len(self.col_types):
            raise ValueError(
                f"table {self.table_id!r}: {len(self.headers)} headers but "
                f"{len(self.col_types)} column types"
            )
        bad = [t for t in self.col_types if t not in COLUMN_TYPES]
        if bad:
            raise ValueError(f"table {self.table_id!r}: unknown column types {bad}")
        for i, row in enumerate(self.rows):
            if len(row) != len(self.headers):
                raise ValueError(
                    f"table {self.table_id!r}: row {i} has {len(row)} cells, "
                    f"expected {len(self.headers)}"
                )

    @property
    def n_cols(self) -> int:
        return len(self.headers)

    @property
    def n_rows(self) -> int:
        return len(self.rows)


@dataclass(frozen=True)
class Condition:
    """One where-clause triple: column index, operator index, literal value."""

    col: int
    op: int
    value: str | int | float


@dataclass(frozen=True)
class LogicalForm:
    """WikiSQL annotation: select column, aggregation, and conditions."""

    sel: int
    agg: int
    conds: tuple[Condition, ...] = ()


@dataclass(frozen=True)
class QuestionRecord:
    phase: int
    table_id: str
    question: str
    lf: LogicalForm

    def __post_init__(self):
        if not self.question:
            raise ValueError("question must be non-empty")


@dataclass
class ValidationReport:
    """Violations found when checking a record against its table.

    Violations are reported, never raised; an empty list means the record
    composes cleanly.
    """

    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def _iter_jsonl(path: str | Path) -> Iterable[tuple[int, dict]]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"invalid JSON: {exc.msg}", path, lineno) from exc
            if not isinstance(obj, dict):
                raise DataFormatError("line is not a JSON object", path, lineno)
            yield lineno, obj


def _require(obj: dict, key: str, path: str | Path, lineno: int):
    if key not in obj:
        raise DataFormatError(f"missing key {key!r}", path, lineno)
    return obj[key]


def load_tables(path: str | Path) -> list[Table]:
    """Load a WikiSQL tables file; raises DataFormatError on malformed lines
    or duplicate table ids."""
    tables: list[Table] = []
    seen: set[str] = set()
    for lineno, obj in _iter_jsonl(path):
        table_id = _require(obj, "id", path, lineno)
        header = _require(obj, "header", path, lineno)
        types = _require(obj, "types", path, lineno)
        rows = _require(obj, "rows", path, lineno)
        try:
            table = Table(
                table_id=table_id,
                headers=tuple(header),
                col_types=tuple(types),
                rows=tuple(tuple(r) for r in rows),
            )
        except (ValueError, TypeError) as exc:
            raise DataFormatError(str(exc), path, lineno) from exc
        if table.table_id in seen:
            raise DataFormatError(f"duplicate table_id {table.table_id!r}", path, lineno)
        seen.add(table.table_id)
        tables.append(table)
    return tables


def index_by_id(tables: Iterable[Table]) -> dict[str, Table]:
    index: dict[str, Table] = {}
    for t in tables:
        if t.table_id in index:
            raise ValueError(f"duplicate table_id {t.table_id!r}")
        index[t.table_id] = t
    return index


def load_questions(path: str | Path) -> list[QuestionRecord]:
    """Load a WikiSQL questions file, preserving file order."""
    records: list[QuestionRecord] = []
    for lineno, obj in _iter_jsonl(path):
        phase = _require(obj, "phase", path, lineno)
        table_id = _require(obj, "table_id", path, lineno)
        question = _require(obj, "question", path, lineno)
        sql = _require(obj, "sql", path, lineno)
        if not isinstance(sql, dict):
            raise DataFormatError("'sql' is not an object", path, lineno)
        sel = _require(sql, "sel", path, lineno)
        agg = _require(sql, "agg", path, lineno)
        conds_raw = _require(sql, "conds", path, lineno)
        try:
            conds = tuple(Condition(col=c[0], op=c[1], value=c[2]) for c in conds_raw)
            record = QuestionRecord(
                phase=phase,
                table_id=table_id,
                question=question,
                lf=LogicalForm(sel=sel, agg=agg, conds=conds),
            )
        except (ValueError, TypeError, IndexError) as exc:
            raise DataFormatError(str(exc), path, lineno) from exc
        records.append(record)
    return records


def validate_record(rec: QuestionRecord, tab: Table) -> ValidationReport:
    """Check a record's logical form against its table.

    Flags out-of-range indices and SUM/AVG applied to a text column (those
    aggregations are only meaningful for numeric data). Operator index 3 is
    legal here; the composer rejects it.
    """
    if rec.table_id != tab.table_id:
        raise ValueError(f"record table {rec.table_id!r} != table {tab.table_id!r}")
    report = ValidationReport()
    lf = rec.lf
    if not 0 <= lf.sel < tab.n_cols:
        report.violations.append(f"sel out of range: {lf.sel}")
    if not 0 <= lf.agg < len(AGG_NAMES):
        report.violations.append(f"agg out of range: {lf.agg}")
    elif lf.agg in (AGG_SUM, AGG_AVG) and 0 <= lf.sel < tab.n_cols:
        if tab.col_types[lf.sel] == "text":
            report.violations.append(
                f"aggregation/type mismatch: {AGG_NAMES[lf.agg]} on text column {lf.sel}"
            )
    for i, cond in enumerate(lf.conds):
        if not 0 <= cond.col < tab.n_cols:
            report.violations.append(f"cond {i}: column out of range: {cond.col}")
        if not 0 <= cond.op < len(OP_NAMES):
            report.violations.append(f"cond {i}: op out of range: {cond.op}")
    return report


def dump_tables(tables: Iterable[Table]) -> str:
    """Re-serialize tables to the input JSONL shape (debug round-trip)."""
    lines = []
    for t in tables:
        lines.append(
            json.dumps(
                {
                    "id": t.table_id,
                    "header": list(t.headers),
                    "types": list(t.col_types),
                    "rows": [list(r) for r in t.rows],
                },
                ensure_ascii=False,
            )
        )
    return "\n".join(lines) + ("\n" if lines else "")
