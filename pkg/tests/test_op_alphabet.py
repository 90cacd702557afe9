"""Tests for precedence matrices, word reduction, and chain extraction."""

from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from opmc.op_alphabet import (
    OpalError,
    OpMatrix,
    Prec,
    chains,
    is_chain,
    iter_bodies,
    mcall,
    parse_matrix,
    parse_word,
    reduction_trace,
    render_brackets,
    supported,
    symbol_at,
)

from .oracles import chain_oracle

M = mcall()

#: The running example: a call that installs a handler, whose protected call
#: raises, after which a second inner call returns normally.
W_EX = ("call", "han", "call", "exc", "call", "ret", "ret")

#: A deeper word whose exception unwinds three pending calls at once.
W_UNWIND = ("call", "han", "call", "call", "call", "exc", "call", "ret", "ret")


class TestMatrix:
    def test_mcall_is_complete(self) -> None:
        assert M.is_complete
        M.check_complete()

    def test_delimiter_conventions(self) -> None:
        for a in M.symbols:
            assert M.prec("#", a) is Prec.YIELDS
            assert M.prec(a, "#") is Prec.TAKES
        assert M.prec("#", "#") is None

    def test_selected_entries(self) -> None:
        assert M.prec("call", "ret") is Prec.EQUALS
        assert M.prec("call", "exc") is Prec.TAKES
        assert M.prec("han", "exc") is Prec.EQUALS
        assert M.prec("han", "call") is Prec.YIELDS
        assert M.prec("ret", "call") is Prec.TAKES

    def test_incomplete_matrix_detected(self) -> None:
        m = OpMatrix(("a", "b"), {("a", "b"): Prec.YIELDS})
        assert not m.is_complete
        with pytest.raises(OpalError):
            m.check_complete()

    def test_delimiter_rejected_as_symbol(self) -> None:
        with pytest.raises(OpalError):
            OpMatrix(("a", "#"), {})

    def test_text_round_trip(self) -> None:
        text = M.to_text()
        again = parse_matrix(text)
        assert again.symbols == M.symbols
        assert again.relation == M.relation

    def test_parse_matrix_rejects_conflicts(self) -> None:
        with pytest.raises(OpalError):
            parse_matrix("symbols: a\na <. a\na .> a\n")


class TestReduction:
    def test_running_example_chains(self) -> None:
        assert chains(M, W_EX) == {(2, 4), (1, 5), (1, 7), (0, 8)}

    def test_running_example_trace(self) -> None:
        trace = reduction_trace(M, W_EX)
        assert trace == [
            "# ⋖ call ⋖ han ⋖ call ⋗ exc ⋗ call ≐ ret ⋗ ret ⋗ #",
            "# ⋖ call ⋖ han ≐ exc ⋗ call ≐ ret ⋗ ret ⋗ #",
            "# ⋖ call ⋖ call ≐ ret ⋗ ret ⋗ #",
            "# ⋖ call ≐ ret ⋗ #",
            "# ≐ #",
        ]

    def test_running_example_brackets(self) -> None:
        assert render_brackets(M, W_EX) == "#[call[[han[call]exc]call ret]ret]#"

    def test_unwinding_word_chains(self) -> None:
        assert chains(M, W_UNWIND) == {
            (4, 6),
            (3, 6),
            (2, 6),
            (1, 7),
            (1, 9),
            (0, 10),
        }

    def test_is_chain(self) -> None:
        assert is_chain(M, W_UNWIND, 2, 6)
        assert not is_chain(M, W_UNWIND, 2, 7)
        assert not is_chain(M, W_UNWIND, 5, 6)  # adjacent pairs are never chains

    def test_empty_word(self) -> None:
        result = parse_word(M, ())
        assert result.chains == frozenset()
        assert supported(M, ())

    def test_single_symbol(self) -> None:
        assert chains(M, ("call",)) == {(0, 2)}

    def test_unsupported_word(self) -> None:
        # only an incomplete matrix can fail to support a word
        m = OpMatrix(("a", "b"), {("a", "b"): Prec.YIELDS})
        assert supported(m, ("a", "b"))
        assert not supported(m, ("a", "a"))
        with pytest.raises(OpalError):
            parse_word(m, ("a", "a"))

    def test_complete_matrix_supports_everything(self) -> None:
        for body in iter_bodies(M.symbols, 4):
            assert supported(M, body)

    def test_symbol_outside_alphabet(self) -> None:
        with pytest.raises(OpalError):
            parse_word(M, ("call", "qux"))


class TestSymbolAt:
    def test_ends_are_delimiters(self) -> None:
        assert symbol_at(W_EX, 0) == "#"
        assert symbol_at(W_EX, 8) == "#"
        assert symbol_at(W_EX, 1) == "call"
        assert symbol_at(W_EX, 7) == "ret"
        with pytest.raises(IndexError):
            symbol_at(W_EX, 9)


@st.composite
def words(draw: st.DrawFn) -> tuple[str, ...]:
    return tuple(
        draw(st.lists(st.sampled_from(M.symbols), min_size=0, max_size=8))
    )


class TestChainOracle:
    @settings(max_examples=300, deadline=None)
    @given(words())
    def test_chains_match_definition(self, body: tuple[str, ...]) -> None:
        """Reduction-derived chains equal the recursive definition's chains.

        The oracle is defined for every word; reduction only for supported
        ones.  On unsupported words the oracle must lack the outermost pair.
        """
        if supported(M, body):
            assert chains(M, body) == chain_oracle(M, body)
        else:
            assert (0, len(body) + 1) not in chain_oracle(M, body)

    def test_oracle_on_goldens(self) -> None:
        assert chain_oracle(M, W_EX) == {(2, 4), (1, 5), (1, 7), (0, 8)}
        assert chain_oracle(M, W_UNWIND) == {
            (4, 6),
            (3, 6),
            (2, 6),
            (1, 7),
            (1, 9),
            (0, 10),
        }


class TestEnumeration:
    def test_counts(self) -> None:
        all3 = list(iter_bodies(("a", "b"), 3))
        assert len(all3) == 1 + 2 + 4 + 8
        assert all3[0] == ()
        no_empty = list(iter_bodies(("a", "b"), 2, include_empty=False))
        assert len(no_empty) == 6

    def test_singleton_chains(self) -> None:
        for b in iter_bodies(M.symbols, 1, include_empty=False):
            assert chains(M, b) == {(0, 2)}
