"""Silver training-pair generation: random logical forms over real tables,
rendered to SQL, paired with questions from a pluggable generator.

Sampling guarantees that every statement executes cleanly on its own table
and that each condition alone matches at least one row: condition values are
drawn from actual cells, and inequality conditions are probed against the
materialized table with bounded resampling (falling back to equality, which
always matches). The neural question generator is out of scope here; the
``QuestionGenerator`` protocol is its seam and a deterministic template
implementation stands in for it.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Protocol

from .data import (
    AGG_AVG,
    AGG_COUNT,
    AGG_MAX,
    AGG_MIN,
    AGG_NONE,
    AGG_SUM,
    Condition,
    LogicalForm,
    Table,
)
from .engine import TableCache, execute
from .normalize import cell_text
from .sql import SqlStatement, compose, render

# Inequality probes retry this many row draws before falling back to "=".
_PROBE_RETRIES = 8
# Resampling budget per silver example before a duplicate statement is kept.
_DEDUPE_RETRIES = 25


class SamplerError(ValueError):
    pass


@dataclass(frozen=True)
class SamplerConfig:
    max_conds: int = 3
    allow_zero_conds: bool = True
    numeric_agg_only: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.max_conds < 0:
            raise ValueError("max_conds must be >= 0")


class QuestionGenerator(Protocol):
    """Anything that can phrase a statement as a natural-language question."""

    def question_for(self, stmt: SqlStatement, tab: Table) -> str: ...


_AGG_PHRASES = {
    AGG_NONE: "what is the {sel}",
    AGG_COUNT: "how many {sel}",
    AGG_MAX: "what is the highest {sel}",
    AGG_MIN: "what is the lowest {sel}",
    AGG_SUM: "what is the total {sel}",
    AGG_AVG: "what is the average {sel}",
}

_OP_PHRASES = {"=": "is", ">": "is more than", "<": "is less than"}


def template_question(stmt: SqlStatement, tab: Table) -> str:
    """Deterministic English question for a statement.

    Every condition value appears verbatim, so extraction-style training and
    evaluation stay well-posed. The table argument is accepted for interface
    parity with model-backed generators.
    """
    parts = [_AGG_PHRASES[stmt.agg].format(sel=stmt.sel_col)]
    for col, op, value in stmt.conds:
        parts.append(f"when {col} {_OP_PHRASES[op]} {cell_text(value)}")
    return " ".join(parts)


class TemplateQuestionGenerator:
    """Template-based stand-in for a reverse question-generation model."""

    def question_for(self, stmt: SqlStatement, tab: Table) -> str:
        return template_question(stmt, tab)


def _table_db(tab: Table, cache: TableCache | None):
    return (cache or _probe_cache).get(tab)


_probe_cache = TableCache()


def _cond_matches(tab: Table, col: int, op_idx: int, value, cache: TableCache | None) -> bool:
    """True when the single condition selects at least one row, judged by the
    engine itself so the check shares its comparison semantics."""
    stmt = compose(
        LogicalForm(sel=col, agg=AGG_NONE, conds=(Condition(col=col, op=op_idx, value=value),)),
        tab,
    )
    result = execute(render(stmt), _table_db(tab, cache))
    return not result.is_error and len(result.rows) > 0


def _sample_value(tab: Table, col: int, rng: random.Random):
    """Pick a non-null cell from the column, or None when the column is
    entirely null."""
    for _ in range(_PROBE_RETRIES):
        value = tab.rows[rng.randrange(tab.n_rows)][col]
        if value is not None:
            return value
    for row in tab.rows:
        if row[col] is not None:
            return row[col]
    return None


def _sample_condition(
    tab: Table, rng: random.Random, cache: TableCache | None
) -> Condition:
    col = rng.randrange(tab.n_cols)
    if tab.col_types[col] == "text":
        op = 0
    else:
        op = rng.randrange(3)
    value = _sample_value(tab, col, rng)
    if value is None:
        # Entirely-null column: retry on a column that has data.
        candidates = [c for c in range(tab.n_cols) if any(r[c] is not None for r in tab.rows)]
        if not candidates:
            raise SamplerError(f"table {tab.table_id!r} has no non-null cells to sample")
        col = candidates[rng.randrange(len(candidates))]
        op = 0 if tab.col_types[col] == "text" else rng.randrange(3)
        value = _sample_value(tab, col, rng)
    if op != 0:
        for _ in range(_PROBE_RETRIES):
            if _cond_matches(tab, col, op, value, cache):
                break
            value = _sample_value(tab, col, rng)
        else:
            op = 0  # equality on an actual cell always matches
    return Condition(col=col, op=op, value=value)


def sample_logical_form(
    tab: Table,
    rng: random.Random,
    cfg: SamplerConfig,
    cache: TableCache | None = None,
) -> LogicalForm:
    """Draw one random logical form over the table.

    The select column is uniform over columns; the aggregation is uniform
    over all six slots but redrawn from the non-numeric ones when the select
    column is text and ``numeric_agg_only`` is set; the condition count is
    uniform over 0..max_conds (1..max_conds when zero is disallowed).
    Deterministic given the rng state.
    """
    if tab.n_rows == 0 or tab.n_cols == 0:
        raise SamplerError("cannot sample from empty table")
    sel = rng.randrange(tab.n_cols)
    agg = rng.randrange(6)
    if cfg.numeric_agg_only and tab.col_types[sel] == "text" and agg in (AGG_SUM, AGG_AVG):
        agg = rng.randrange(4)
    low = 0 if cfg.allow_zero_conds else 1
    n_conds = rng.randint(low, cfg.max_conds) if cfg.max_conds >= low else low
    conds = tuple(_sample_condition(tab, rng, cache) for _ in range(n_conds))
    return LogicalForm(sel=sel, agg=agg, conds=conds)


@dataclass(frozen=True)
class SilverExample:
    question: str
    sql_text: str
    table_id: str
    lf: LogicalForm


@dataclass
class SilverRun:
    """Generated examples plus the run report."""

    examples: list[SilverExample] = field(default_factory=list)
    duplicates_kept: int = 0


def generate_silver(
    tables: list[Table],
    n: int,
    qg: QuestionGenerator,
    rng: random.Random,
    cfg: SamplerConfig,
    cache: TableCache | None = None,
) -> SilverRun:
    """Generate ``n`` silver (question, SQL, table) triples.

    Tables are chosen uniformly. Identical rendered statements are
    de-duplicated by resampling up to a retry bound, after which the
    duplicate is kept and counted in the run report.
    """
    if not tables:
        raise SamplerError("no tables to sample from")
    run = SilverRun()
    seen: set[str] = set()
    for _ in range(n):
        for _attempt in range(_DEDUPE_RETRIES):
            tab = tables[rng.randrange(len(tables))]
            lf = sample_logical_form(tab, rng, cfg, cache)
            stmt = compose(lf, tab)
            sql_text = render(stmt)
            if sql_text not in seen:
                break
        else:
            run.duplicates_kept += 1
        seen.add(sql_text)
        question = qg.question_for(stmt, tab)
        if not question:
            raise SamplerError("question generator returned an empty question")
        run.examples.append(
            SilverExample(question=question, sql_text=sql_text, table_id=tab.table_id, lf=lf)
        )
    return run
