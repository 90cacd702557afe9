"""Unit tests for the s-expression term layer."""

from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from opmc.terms import (
    SExprError,
    app,
    bv_lit,
    bv_sort,
    conj,
    disj,
    equals,
    implies,
    iter_symbols,
    neg,
    parse_all,
    parse_bv,
    parse_one,
    render,
)


class TestBuilders:
    def test_app(self) -> None:
        assert app("f") == "f"
        assert app("f", "x", "y") == ("f", "x", "y")

    def test_conj_flattening(self) -> None:
        assert conj([]) == "true"
        assert conj(["a"]) == "a"
        assert conj(["a", "b"]) == ("and", "a", "b")
        assert conj(["true", "a"]) == "a"

    def test_disj_flattening(self) -> None:
        assert disj([]) == "false"
        assert disj(["a"]) == "a"
        assert disj(["false", "a", "b"]) == ("or", "a", "b")

    def test_neg(self) -> None:
        assert neg("true") == "false"
        assert neg("false") == "true"
        assert neg("a") == ("not", "a")
        assert neg(neg("a")) == "a"

    def test_implies(self) -> None:
        assert implies("true", "a") == "a"
        assert implies("false", "a") == "true"
        assert implies("a", "b") == ("=>", "a", "b")

    def test_bv(self) -> None:
        assert bv_lit(5, 4) == "#b0101"
        assert bv_sort(3) == ("_", "BitVec", "3")
        with pytest.raises(SExprError):
            bv_lit(8, 3)

    def test_equals(self) -> None:
        assert equals("a", "b") == ("=", "a", "b")


class TestRenderParse:
    def test_render(self) -> None:
        assert render(("assert", ("=", "x", "#b01"))) == "(assert (= x #b01))"

    def test_parse_round_trip(self) -> None:
        text = "(assert (or (not p) (= (f x) #b010)))"
        assert render(parse_one(text)) == text

    def test_parse_all_with_comments(self) -> None:
        text = "; header\n(a b) ; trailing\n(c (d e))\n"
        assert parse_all(text) == [("a", "b"), ("c", ("d", "e"))]

    def test_parse_quoted_symbol(self) -> None:
        assert parse_one("(|a b| c)") == ("|a b|", "c")

    def test_parse_string_literal(self) -> None:
        assert parse_one('(error "no (such) term")') == (
            "error",
            '"no (such) term"',
        )

    def test_unbalanced(self) -> None:
        with pytest.raises(SExprError):
            parse_one("(a (b)")
        with pytest.raises(SExprError):
            parse_one(")")

    def test_iter_symbols(self) -> None:
        assert list(iter_symbols(("f", ("g", "x"), "y"))) == ["f", "g", "x", "y"]

    def test_parse_bv_notations(self) -> None:
        assert parse_bv("#b0101") == (5, 4)
        assert parse_bv("#x5") == (5, 4)
        assert parse_bv("#xff") == (255, 8)
        assert parse_bv(("_", "bv5", "4")) == (5, 4)
        assert parse_bv("true") is None
        assert parse_bv(("f", "x")) is None


def sexprs() -> st.SearchStrategy:
    atoms = st.sampled_from(["a", "bv42", "#b0101", "=", "and", "x!0"])
    return st.recursive(
        atoms,
        lambda kids: st.lists(kids, min_size=1, max_size=4).map(tuple),
        max_leaves=20,
    )


class TestDeterminism:
    @settings(max_examples=300, deadline=None)
    @given(sexprs())
    def test_round_trip(self, term) -> None:
        assert parse_one(render(term)) == term

    @settings(max_examples=100, deadline=None)
    @given(sexprs())
    def test_rendering_is_stable(self, term) -> None:
        assert render(term) == render(parse_one(render(term)))
