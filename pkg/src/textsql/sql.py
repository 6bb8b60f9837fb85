"""Structured SQL for the WikiSQL subset.

A statement has exactly one select column, one aggregation slot, one table,
and conjunctive equality/inequality conditions. Statements compose from
logical forms, render to a byte-stable textual wire format, and parse back
from model-generated text.

Wire format (keywords emitted lowercase, identifiers bracket-quoted with
``]`` escaped as ``]]``, string literals single-quoted with ``'`` doubled,
numeric literals unquoted)::

    select [col] from [table-id]
    select agg([col]) from [table-id] where [c1] = 'v1' and [c2] > 3

All operations are pure and the types immutable, so they are safe for
concurrent use.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .data import AGG_NAMES, AGG_NONE, LogicalForm, OP_OTHER, Table
from .normalize import format_number, normalize_text

RENDER_OPS = ("=", ">", "<")

AGG_BY_NAME = {name: i for i, name in enumerate(AGG_NAMES) if name}


class ComposeError(ValueError):
    """Raised when a logical form cannot be turned into a statement."""


@dataclass(frozen=True)
class SqlStatement:
    """One WikiSQL-subset statement with resolved column names.

    ``conds`` holds ``(column_name, op, value)`` triples where ``op`` is one
    of ``=``, ``>``, ``<`` and ``value`` is a string or number. String values
    and column names are expected in normalized (lowercase) form; ``compose``
    produces them that way.
    """

    agg: int
    sel_col: str
    table_id: str
    conds: tuple[tuple[str, str, str | int | float], ...] = ()

    def __post_init__(self):
        if not 0 <= self.agg < len(AGG_NAMES):
            raise ValueError(f"agg index out of range: {self.agg}")
        for c in self.conds:
            if c[1] not in RENDER_OPS:
                raise ValueError(f"unsupported operator: {c[1]!r}")


def quote_ident(name: str) -> str:
    """Bracket-quote an identifier, escaping ``]`` as ``]]``."""
    return "[" + name.replace("]", "]]") + "]"


def format_literal(value: str | int | float) -> str:
    """Render a condition value: strings single-quoted, numbers bare."""
    if isinstance(value, str):
        return "'" + value.replace("'", "''") + "'"
    return format_number(value)


def compose(lf: LogicalForm, tab: Table) -> SqlStatement:
    """Resolve a logical form's indices against a table.

    Column indices become lowercased header names; string condition values
    are lowercased. Numeric values pass through and render unquoted, while
    string-typed values stay quoted even when they look numeric; comparison
    semantics for those are the engine's concern.
    """
    if not 0 <= lf.sel < tab.n_cols:
        raise ComposeError(f"sel index out of range: {lf.sel}")
    if not 0 <= lf.agg < len(AGG_NAMES):
        raise ComposeError(f"agg index out of range: {lf.agg}")
    conds = []
    for cond in lf.conds:
        if not 0 <= cond.col < tab.n_cols:
            raise ComposeError(f"condition column out of range: {cond.col}")
        if cond.op == OP_OTHER:
            raise ComposeError("unsupported operator")
        if not 0 <= cond.op < len(RENDER_OPS):
            raise ComposeError(f"operator index out of range: {cond.op}")
        value = cond.value
        if isinstance(value, str):
            value = normalize_text(value)
        elif not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ComposeError(f"unsupported value type: {type(cond.value).__name__}")
        conds.append((normalize_text(tab.headers[cond.col]), RENDER_OPS[cond.op], value))
    return SqlStatement(
        agg=lf.agg,
        sel_col=normalize_text(tab.headers[lf.sel]),
        table_id=tab.table_id,
        conds=tuple(conds),
    )


def render(stmt: SqlStatement) -> str:
    """Render to the wire format. Deterministic: equal statements render to
    byte-identical strings."""
    sel = quote_ident(stmt.sel_col)
    if stmt.agg != AGG_NONE:
        sel = f"{AGG_NAMES[stmt.agg]}({sel})"
    text = f"select {sel} from {quote_ident(stmt.table_id)}"
    if stmt.conds:
        clauses = " and ".join(
            f"{quote_ident(col)} {op} {format_literal(value)}" for col, op, value in stmt.conds
        )
        text += f" where {clauses}"
    return text


# --- parsing ----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<bracket>\[(?:[^\]]|\]\])*\])
  | (?P<string>'(?:[^']|'')*')
  | (?P<number>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[=<>!]+)
  | (?P<lparen>\()
  | (?P<rparen>\))
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class ParseFailure:
    """Why a string is not a statement; ``token_index`` is the position of
    the first offending token (end-of-input counts as one past the last)."""

    message: str
    token_index: int

    def __bool__(self):  # allows `if not result:` checks
        return False


@dataclass(frozen=True)
class RawStatement:
    """Shape-level parse of a statement before slot validation.

    ``agg_token`` is the raw function name (None when no aggregation was
    written) and each condition keeps its raw operator token. Evaluation uses
    this to tell an unrecognized aggregation or operator apart from an
    unparseable string. Token indices of the agg and operator tokens are
    kept for failure reporting.
    """

    agg_token: str | None
    agg_index: int
    sel_col: str
    table_id: str
    conds: tuple[tuple[str, str, str | int | float], ...]
    op_indices: tuple[int, ...]


def _tokenize(text: str) -> list[tuple[str, object]] | ParseFailure:
    tokens: list[tuple[str, object]] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            return ParseFailure(f"unexpected character {text[pos]!r}", len(tokens))
        pos = m.end()
        kind = m.lastgroup
        if kind == "ws":
            continue
        raw = m.group()
        if kind == "bracket":
            tokens.append(("ident", raw[1:-1].replace("]]", "]")))
        elif kind == "string":
            tokens.append(("string", raw[1:-1].replace("''", "'")))
        elif kind == "number":
            if re.fullmatch(r"[+-]?\d+", raw):
                tokens.append(("number", int(raw)))
            else:
                tokens.append(("number", float(raw)))
        elif kind == "word":
            tokens.append(("word", raw))
        elif kind == "op":
            tokens.append(("op", raw))
        else:
            tokens.append((kind, raw))
    return tokens


def parse_raw(text: str) -> RawStatement | ParseFailure:
    """Parse the statement shape, accepting any aggregation-function word and
    any operator token. Strict slot validation happens in ``parse``."""
    tokens = _tokenize(text)
    if isinstance(tokens, ParseFailure):
        return tokens

    i = 0

    def peek() -> tuple[str, object] | None:
        return tokens[i] if i < len(tokens) else None

    def fail(expected: str) -> ParseFailure:
        got = f"{tokens[i][1]!r}" if i < len(tokens) else "end of input"
        return ParseFailure(f"expected {expected}, got {got}", i)

    def is_keyword(tok, kw: str) -> bool:
        return tok is not None and tok[0] == "word" and str(tok[1]).lower() == kw

    if not is_keyword(peek(), "select"):
        return fail("'select'")
    i += 1

    agg_token: str | None = None
    agg_index = -1
    tok = peek()
    if tok is not None and tok[0] == "word":
        agg_token = str(tok[1])
        agg_index = i
        i += 1
        if peek() is None or peek()[0] != "lparen":
            return fail("'('")
        i += 1
        if peek() is None or peek()[0] != "ident":
            return fail("a bracket-quoted column")
        sel_col = str(peek()[1])
        i += 1
        if peek() is None or peek()[0] != "rparen":
            return fail("')'")
        i += 1
    elif tok is not None and tok[0] == "ident":
        sel_col = str(tok[1])
        i += 1
    else:
        return fail("a column or aggregation function")

    if not is_keyword(peek(), "from"):
        return fail("'from'")
    i += 1
    if peek() is None or peek()[0] != "ident":
        return fail("a bracket-quoted table id")
    table_id = str(peek()[1])
    i += 1

    conds: list[tuple[str, str, str | int | float]] = []
    op_indices: list[int] = []
    if peek() is not None:
        if not is_keyword(peek(), "where"):
            return fail("'where' or end of statement")
        i += 1
        while True:
            if peek() is None or peek()[0] != "ident":
                return fail("a bracket-quoted condition column")
            col = str(peek()[1])
            i += 1
            if peek() is None or peek()[0] != "op":
                return fail("an operator")
            op_indices.append(i)
            op = str(peek()[1])
            i += 1
            tok = peek()
            if tok is None or tok[0] not in ("string", "number"):
                return fail("a literal")
            conds.append((col, op, tok[1]))
            i += 1
            if peek() is None:
                break
            if not is_keyword(peek(), "and"):
                return fail("'and' or end of statement")
            i += 1

    return RawStatement(
        agg_token=agg_token,
        agg_index=agg_index,
        sel_col=sel_col,
        table_id=table_id,
        conds=tuple(conds),
        op_indices=tuple(op_indices),
    )


def parse(text: str) -> SqlStatement | ParseFailure:
    """Inverse of ``render`` on its image; tolerant of surrounding whitespace
    and keyword case. Failures are values so that evaluation can count
    malformed generations instead of crashing."""
    raw = parse_raw(text)
    if isinstance(raw, ParseFailure):
        return raw
    if raw.agg_token is None:
        agg = AGG_NONE
    else:
        agg = AGG_BY_NAME.get(raw.agg_token.lower())
        if agg is None:
            return ParseFailure(
                f"unknown aggregation function {raw.agg_token!r}", raw.agg_index
            )
    for (col, op, value), op_idx in zip(raw.conds, raw.op_indices):
        if op not in RENDER_OPS:
            return ParseFailure(f"unknown operator {op!r}", op_idx)
    return SqlStatement(agg=agg, sel_col=raw.sel_col, table_id=raw.table_id, conds=raw.conds)
