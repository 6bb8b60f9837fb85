"""Compose/render/parse round trips and the statement wire format."""

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from textsql import (
    ComposeError,
    Condition,
    LogicalForm,
    ParseFailure,
    SqlStatement,
    Table,
    compose,
    format_literal,
    parse,
    parse_raw,
    quote_ident,
    render,
)

from conftest import PLATES_SQL


class TestQuoting:
    def test_plain_identifier(self):
        assert quote_ident("notes") == "[notes]"

    def test_closing_bracket_doubles(self):
        assert quote_ident("a]b") == "[a]]b]"

    def test_string_literal_quote_doubles(self):
        assert format_literal("it's") == "'it''s'"

    def test_numbers_render_bare(self):
        assert format_literal(10) == "10"
        assert format_literal(-3.5) == "-3.5"


class TestCompose:
    def test_reference_statement(self, plates_record, plates_table):
        stmt = compose(plates_record.lf, plates_table)
        assert stmt.sel_col == "notes"
        assert stmt.agg == 0
        assert stmt.conds == (("current slogan", "=", "south australia"),)
        assert render(stmt) == PLATES_SQL

    def test_headers_and_string_values_lowercase(self, plates_table):
        lf = LogicalForm(sel=0, agg=0, conds=(Condition(5, 0, "No Slogan ON current series"),))
        stmt = compose(lf, plates_table)
        assert stmt.sel_col == "state/territory"
        assert stmt.conds[0][2] == "no slogan on current series"

    def test_sel_out_of_range(self, plates_table):
        with pytest.raises(ComposeError, match="sel index"):
            compose(LogicalForm(sel=6, agg=0), plates_table)

    def test_agg_out_of_range(self, plates_table):
        with pytest.raises(ComposeError, match="agg index"):
            compose(LogicalForm(sel=0, agg=-1), plates_table)

    def test_condition_column_out_of_range(self, plates_table):
        lf = LogicalForm(sel=0, agg=0, conds=(Condition(6, 0, "x"),))
        with pytest.raises(ComposeError, match="condition column"):
            compose(lf, plates_table)

    def test_op_three_rejected(self, plates_table):
        lf = LogicalForm(sel=0, agg=0, conds=(Condition(0, 3, "x"),))
        with pytest.raises(ComposeError, match="unsupported operator"):
            compose(lf, plates_table)

    def test_boolean_value_rejected(self, plates_table):
        lf = LogicalForm(sel=0, agg=0, conds=(Condition(0, 0, True),))
        with pytest.raises(ComposeError, match="value type"):
            compose(lf, plates_table)


class TestRender:
    def test_no_conditions(self):
        stmt = SqlStatement(agg=0, sel_col="a", table_id="t-1")
        assert render(stmt) == "select [a] from [t-1]"

    def test_aggregation_wraps_column(self):
        stmt = SqlStatement(agg=3, sel_col="a", table_id="t-1")
        assert render(stmt) == "select count([a]) from [t-1]"

    def test_conditions_join_with_and(self):
        stmt = SqlStatement(
            agg=0,
            sel_col="a",
            table_id="t-1",
            conds=(("b", "=", "x"), ("c", ">", 3)),
        )
        assert render(stmt) == "select [a] from [t-1] where [b] = 'x' and [c] > 3"

    def test_string_typed_number_stays_quoted(self, points_table):
        # A value annotated as text renders quoted even when it looks
        # numeric; dropping the quotes would change comparison semantics.
        lf = LogicalForm(sel=0, agg=0, conds=(Condition(0, 0, "10"),))
        assert render(compose(lf, points_table)).endswith("where [player] = '10'")

    def test_statement_rejects_foreign_operator(self):
        with pytest.raises(ValueError, match="unsupported operator"):
            SqlStatement(agg=0, sel_col="a", table_id="t", conds=(("b", "!=", 1),))


class TestParse:
    def test_inverse_of_render_on_reference(self, plates_record, plates_table):
        stmt = compose(plates_record.lf, plates_table)
        assert parse(render(stmt)) == stmt

    def test_tolerates_case_and_whitespace(self):
        parsed = parse("  SELECT  Count( [a] )  FROM [t-1]  ")
        assert parsed == SqlStatement(agg=3, sel_col="a", table_id="t-1")

    def test_truncated_statement_fails_one_past_last_token(self):
        failure = parse("select [a] from")
        assert isinstance(failure, ParseFailure)
        assert failure.token_index == 3

    def test_failure_is_falsy(self):
        assert not parse("select [a] from")
        assert parse("select [a] from [t]")

    def test_unknown_aggregation_function(self):
        failure = parse("select median([a]) from [t]")
        assert isinstance(failure, ParseFailure)
        assert failure.token_index == 1
        assert "median" in failure.message

    def test_unknown_operator(self):
        failure = parse("select [a] from [t] where [b] != 'x'")
        assert isinstance(failure, ParseFailure)
        assert failure.token_index == 6
        assert "!=" in failure.message

    def test_trailing_garbage(self):
        failure = parse("select [a] from [t] extra")
        assert isinstance(failure, ParseFailure)
        assert "where" in failure.message

    def test_unexpected_character(self):
        failure = parse("select [a] from [t] where [b] = $")
        assert isinstance(failure, ParseFailure)

    def test_missing_literal(self):
        failure = parse("select [a] from [t] where [b] =")
        assert isinstance(failure, ParseFailure)
        assert "literal" in failure.message

    def test_escaped_identifier_and_literal_round_trip(self):
        text = "select [a]]b] from [t] where [c] = 'it''s'"
        parsed = parse(text)
        assert parsed.sel_col == "a]b"
        assert parsed.conds == (("c", "=", "it's"),)
        assert render(parsed) == text

    def test_raw_parse_accepts_unknown_slots(self):
        raw = parse_raw("select median([a]) from [t] where [b] >= 'x'")
        assert raw.agg_token == "median"
        assert raw.conds == (("b", ">=", "x"),)


# --- property tests ----------------------------------------------------------

_VALUES = st.one_of(
    st.integers(min_value=-10**6, max_value=10**6),
    st.floats(allow_nan=False, allow_infinity=False, width=64),
    st.text(
        alphabet=st.characters(blacklist_categories=["Cs"], blacklist_characters="\x00"),
        min_size=0,
        max_size=25,
    ),
)


@st.composite
def statements(draw):
    """A random table plus a logical form valid against it."""
    seed = draw(st.integers(0, 10**6))
    rng = random.Random(seed)
    n_cols = draw(st.integers(1, 5))
    headers = []
    for i in range(n_cols):
        name = draw(st.text(alphabet="abcxyz]'`\" é", min_size=1, max_size=8))
        while name.lower() in [h.lower() for h in headers] or not name.strip():
            name = name + chr(ord("a") + i)
        headers.append(name)
    tab = Table(
        table_id=f"{rng.randrange(1,3)}-{seed}-1",
        headers=tuple(headers),
        col_types=tuple(draw(st.sampled_from(["text", "real"])) for _ in range(n_cols)),
        rows=(),
    )
    n_conds = draw(st.integers(0, 3))
    lf = LogicalForm(
        sel=draw(st.integers(0, n_cols - 1)),
        agg=draw(st.integers(0, 5)),
        conds=tuple(
            Condition(draw(st.integers(0, n_cols - 1)), draw(st.integers(0, 2)), draw(_VALUES))
            for _ in range(n_conds)
        ),
    )
    return lf, tab


class TestRoundTripProperty:
    @given(statements())
    @settings(max_examples=300, deadline=None)
    def test_parse_render_compose_identity(self, case):
        lf, tab = case
        stmt = compose(lf, tab)
        assert parse(render(stmt)) == stmt

    @given(st.text(max_size=60))
    @settings(max_examples=300, deadline=None)
    def test_parse_never_raises(self, text):
        result = parse(text)
        assert isinstance(result, (SqlStatement, ParseFailure))
