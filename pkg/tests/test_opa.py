"""Tests for operator precedence automata."""

from __future__ import annotations

from hypothesis import given, settings, strategies as st

from opmc.op_alphabet import OpMatrix, Prec, mcall, supported
from opmc.opa import Opa

M = mcall()


def no_handler_opa() -> Opa:
    """Accepts exactly the supported words that never mention han or exc."""
    q = frozenset(["q"])
    moves = {(next(iter(q)), a): q for a in ("call", "ret")}
    return Opa(
        matrix=M,
        states=q,
        initials=q,
        finals=q,
        push=moves,
        shift=moves,
        pop={(next(iter(q)), next(iter(q))): q},
    )


class TestTrivial:
    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.sampled_from(M.symbols), min_size=0, max_size=7))
    def test_trivial_accepts_exactly_supported(self, body: list[str]) -> None:
        assert Opa.trivial(M).accepts(tuple(body)) == supported(M, tuple(body))

    def test_trivial_on_incomplete_matrix(self) -> None:
        m = OpMatrix(("a", "b"), {("a", "b"): Prec.YIELDS})
        opa = Opa.trivial(m)
        assert opa.accepts(("a", "b"))
        assert not opa.accepts(("a", "a"))
        assert not opa.accepts(("b", "b"))

    def test_empty_word(self) -> None:
        assert Opa.trivial(M).accepts(())


class TestRestricted:
    def test_accepts_pure_call_ret(self) -> None:
        opa = no_handler_opa()
        assert opa.accepts(("call", "ret"))
        assert opa.accepts(("call", "call", "ret", "ret"))
        assert opa.accepts(("call", "ret", "call", "ret"))

    def test_rejects_words_with_handlers(self) -> None:
        opa = no_handler_opa()
        assert not opa.accepts(("call", "han", "call", "exc", "call", "ret", "ret"))
        assert not opa.accepts(("call", "exc"))

    def test_language_enumeration(self) -> None:
        opa = no_handler_opa()
        words = set(opa.language(4))
        assert () in words
        assert ("call", "ret") in words
        assert ("call", "call", "ret", "ret") in words
        assert ("call", "exc") not in words
        # every enumerated word stays within the restricted alphabet
        assert all(set(w) <= {"call", "ret"} for w in words)

    def test_supports_vs_accepts(self) -> None:
        base = no_handler_opa()
        strict = Opa(
            matrix=base.matrix,
            states=base.states,
            initials=base.initials,
            finals=frozenset(),
            push=base.push,
            shift=base.shift,
            pop=base.pop,
        )
        assert strict.supports(("call", "ret"))
        assert not strict.accepts(("call", "ret"))
