"""From raw JSONL to executed query results.

Walks the data path end to end: parse newline-delimited table and question
files, validate a record against its schema, compose the logical form into
a statement, render it in the bracketed wire format, and execute it against
an in-memory SQLite copy of the table.
"""

import tempfile
from pathlib import Path

from textsql import (
    AGG_NAMES,
    OP_NAMES,
    Table,
    TableCache,
    compose,
    dump_tables,
    execute,
    load_questions,
    load_tables,
    index_by_id,
    parse,
    render,
    results_equal,
    rewrite_brackets,
    validate_record,
)

# A small table in the WikiSQL shape: headers, declared column types, rows.
# Mixed-case text and numeric strings are deliberate; materialization
# normalizes both.
MEDALS = Table(
    table_id="1-demo-1",
    headers=("Nation", "Gold", "Sport"),
    col_types=("text", "real", "text"),
    rows=(
        ("Norway", 16, "Skiing"),
        ("Germany", "12", "Luge"),
        ("Canada", 9, "Hockey"),
        ("Norway", 2, "Curling"),
    ),
)

workdir = Path(tempfile.mkdtemp())
tables_path = workdir / "tables.jsonl"
questions_path = workdir / "questions.jsonl"

# Tables serialize one JSON object per line and read back identically.
tables_path.write_text(dump_tables([MEDALS]))
tables = index_by_id(load_tables(tables_path))
print("loaded tables:", sorted(tables))

# Questions carry the gold logical form as {sel, agg, conds} index triples.
questions_path.write_text(
    '{"phase": 1, "table_id": "1-demo-1", "question": "How many golds for Norway?",'
    ' "sql": {"sel": 1, "agg": 4, "conds": [[0, 0, "Norway"]]}}\n'
)
record = load_questions(questions_path)[0]
print("question:", record.question)
print("logical form:", record.lf)

# Validation reports violations instead of raising; an empty list means the
# record composes cleanly against its table.
report = validate_record(record, tables[record.table_id])
print("validation ok:", report.ok, report.violations)

# compose resolves the index triples to (lowercased) names; render produces
# the bracketed wire format; parse inverts render exactly.
stmt = compose(record.lf, MEDALS)
sql_text = render(stmt)
print("aggregations:", AGG_NAMES)
print("operators:   ", OP_NAMES)
print("rendered:    ", sql_text)
print("parse inverts render:", parse(sql_text) == stmt)

# TableCache materializes each table once and hands back the connection.
cache = TableCache()
db = cache.get(MEDALS)
result = execute(sql_text, db)
print("result rows: ", result.rows)

# Norway appears twice, so SUM over the filtered rows gives 16 + 2.
expected = execute("select sum(`gold`) from `1-demo-1` where `nation` = 'norway'", db)
print("matches hand-written SQL:", results_equal(result, expected))

# The wire format quotes identifiers with brackets precisely because SQLite
# treats an unknown double-quoted identifier as a string literal and silently
# matches nothing. Bracket quoting is rewritten to backticks, so a column
# that does not exist is a loud error instead of an empty result.
bad = rewrite_brackets("select [silver] from [1-demo-1]")
print("rewritten:", bad)
print("unknown column is an error:", execute(bad, db).error)

cache.close()
