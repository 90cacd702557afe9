"""Tests for the logic: parsing, normal forms, and direct semantics."""

from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from opmc.op_alphabet import mcall
from opmc.potl import (
    And,
    Atom,
    ChainNext,
    Dir,
    Evaluator,
    Eventually,
    FalseConst,
    Formula,
    FormulaError,
    Globally,
    HNext,
    HRelease,
    HUntil,
    Implies,
    Next,
    Not,
    OpWord,
    Or,
    Release,
    TrueConst,
    Until,
    WChainNext,
    WHNext,
    WNext,
    atoms_of,
    enumerate_opwords,
    is_nnf,
    is_satisfiable_bruteforce,
    nnf,
    parse_formula,
    parse_word_literal,
    pretty,
    render_word,
    satisfies,
    xnf,
)

M = mcall()

W_EX = parse_word_literal(M, "call han call exc call ret ret")
W_UNWIND = parse_word_literal(M, "call han call call call exc call ret ret")


def ev(text: str) -> Evaluator:
    return Evaluator(parse_word_literal(M, text))


class TestParser:
    def test_atoms_and_connectives(self) -> None:
        f = parse_formula("call && ! p || q --> ret")
        assert f == Implies(
            Or(And(Atom("call"), Not(Atom("p"))), Atom("q")), Atom("ret")
        )

    def test_prefix_operators(self) -> None:
        assert parse_formula("Nd p") == Next(Dir.DOWN, Atom("p"))
        assert parse_formula("WCNu p") == WChainNext(Dir.UP, Atom("p"))
        assert parse_formula("HNd HNu p") == HNext(Dir.DOWN, HNext(Dir.UP, Atom("p")))

    def test_until_precedence(self) -> None:
        # until binds looser than || and tighter than -->
        f = parse_formula("a || b Ud c --> d")
        assert f == Implies(
            Until(Dir.DOWN, Or(Atom("a"), Atom("b")), Atom("c")), Atom("d")
        )

    def test_until_right_associative(self) -> None:
        f = parse_formula("a Uu b Uu c")
        assert f == Until(Dir.UP, Atom("a"), Until(Dir.UP, Atom("b"), Atom("c")))

    def test_constants_and_delimiter(self) -> None:
        assert parse_formula("true") == TrueConst()
        assert parse_formula("false") == FalseConst()
        assert parse_formula("#") == Atom("#")

    def test_globally_and_eventually(self) -> None:
        assert parse_formula("G (p --> q)") == Globally(
            Implies(Atom("p"), Atom("q"))
        )
        # both are ordinary prefix operators and may be nested
        assert parse_formula("Nd G p") == Next(Dir.DOWN, Globally(Atom("p")))
        assert parse_formula("F (p && exc)") == Eventually(
            And(Atom("p"), Atom("exc"))
        )
        assert parse_formula("G p && q") == And(Globally(Atom("p")), Atom("q"))

    def test_reserved_words_are_not_atoms(self) -> None:
        with pytest.raises(FormulaError):
            parse_formula("Ud")
        with pytest.raises(FormulaError):
            parse_formula("p && true Ud")

    def test_trailing_junk(self) -> None:
        with pytest.raises(FormulaError):
            parse_formula("p q")

    def test_atoms_of(self) -> None:
        assert atoms_of(parse_formula("call Ud (p && ! q)")) == {"call", "p", "q"}


def formulas(max_leaves: int = 6) -> st.SearchStrategy[Formula]:
    leaves: st.SearchStrategy[Formula] = st.one_of(
        st.sampled_from(
            [Atom("call"), Atom("ret"), Atom("han"), Atom("exc"), Atom("p"), Atom("#")]
        ),
        st.just(TrueConst()),
        st.just(FalseConst()),
    )

    def extend(children: st.SearchStrategy[Formula]) -> st.SearchStrategy[Formula]:
        unary = st.sampled_from(
            [Not, Globally, Eventually]
            + [
                lambda a, op=op, d=d: op(d, a)
                for op in (Next, WNext, ChainNext, WChainNext, HNext, WHNext)
                for d in (Dir.DOWN, Dir.UP)
            ]
        )
        binary = st.sampled_from(
            [And, Or, Implies]
            + [
                lambda l, r, op=op, d=d: op(d, l, r)
                for op in (Until, Release, HUntil, HRelease)
                for d in (Dir.DOWN, Dir.UP)
            ]
        )
        return st.one_of(
            st.builds(lambda f, a: f(a), unary, children),
            st.builds(lambda f, l, r: f(l, r), binary, children, children),
        )

    return st.recursive(leaves, extend, max_leaves=max_leaves)


def small_words() -> st.SearchStrategy[OpWord]:
    entry = st.tuples(
        st.sampled_from(M.symbols), st.sampled_from([frozenset(), frozenset(["p"])])
    )
    return st.builds(
        lambda entries: OpWord(M, tuple(entries)),
        st.lists(entry, min_size=0, max_size=5),
    )


class TestPretty:
    @settings(max_examples=400, deadline=None)
    @given(formulas())
    def test_round_trip(self, f: Formula) -> None:
        assert parse_formula(pretty(f)) == f

    def test_minimal_parens(self) -> None:
        assert pretty(parse_formula("a && b || c")) == "a && b || c"
        assert pretty(parse_formula("a && (b || c)")) == "a && (b || c)"
        assert pretty(parse_formula("Nd (p Ud q)")) == "Nd (p Ud q)"
        assert pretty(parse_formula("(a Ud b) Ud c")) == "(a Ud b) Ud c"


class TestNnf:
    @settings(max_examples=300, deadline=None)
    @given(formulas())
    def test_nnf_is_negation_normal(self, f: Formula) -> None:
        assert is_nnf(nnf(f))

    @settings(max_examples=300, deadline=None)
    @given(formulas(max_leaves=4), small_words())
    def test_nnf_preserves_meaning(self, f: Formula, word: OpWord) -> None:
        evaluator = Evaluator(word)
        for i in range(0, word.last + 1):
            assert evaluator.eval(nnf(f), i) == evaluator.eval(f, i)

    @settings(max_examples=300, deadline=None)
    @given(formulas(max_leaves=4), small_words())
    def test_negation_dualities(self, f: Formula, word: OpWord) -> None:
        evaluator = Evaluator(word)
        for i in range(0, word.last + 1):
            assert evaluator.eval(nnf(Not(f)), i) == (not evaluator.eval(f, i))


class TestXnf:
    @settings(max_examples=400, deadline=None)
    @given(formulas(max_leaves=4), small_words())
    def test_xnf_preserves_meaning(self, f: Formula, word: OpWord) -> None:
        """The local unrolling agrees with the direct path semantics.

        Positions start at one: the delimiter tests inside the unrollings
        of ``G`` and ``F`` refer to the end of the word, so the unrolled
        forms are only meant for body positions and the trailing delimiter.
        """
        g = nnf(f)
        evaluator = Evaluator(word)
        for i in range(1, word.last + 1):
            assert evaluator.eval(xnf(g), i) == evaluator.eval(g, i)

    def test_xnf_exhaustive_until_release(self) -> None:
        pool = [
            parse_formula("call Ud exc"),
            parse_formula("true Uu ret"),
            parse_formula("p Rd call"),
            parse_formula("false Ru (ret || exc)"),
            parse_formula("call HUd exc"),
            parse_formula("true HUu call"),
            parse_formula("p HRd call"),
            parse_formula("false HRu exc"),
        ]
        for word in enumerate_opwords(M, ["p"], 4, include_empty=True):
            evaluator = Evaluator(word)
            for f in pool:
                g = nnf(f)
                for i in range(0, word.last + 1):
                    assert evaluator.eval(xnf(g), i) == evaluator.eval(g, i), (
                        f"{pretty(f)} at {i} on {render_word(word)}"
                    )


class TestPaths:
    def test_summary_path_down(self) -> None:
        evaluator = Evaluator(W_EX)
        assert evaluator.summary_path(1, 6, Dir.DOWN) == (1, 5, 6)

    def test_summary_path_up(self) -> None:
        evaluator = Evaluator(W_EX)
        assert evaluator.summary_path(2, 7, Dir.UP) == (2, 4, 5, 6, 7)

    def test_summary_path_missing(self) -> None:
        evaluator = Evaluator(W_EX)
        assert evaluator.summary_path(2, 6, Dir.DOWN) is None

    def test_singleton_path(self) -> None:
        evaluator = Evaluator(W_EX)
        assert evaluator.summary_path(3, 3, Dir.DOWN) == (3,)

    def test_hier_path_on_unwinding_word(self) -> None:
        evaluator = Evaluator(W_UNWIND)
        assert evaluator.hier_path(3, 4, Dir.DOWN) == (3, 4)
        assert evaluator.hier_family(6, Dir.DOWN) == [3, 4]

    def test_hier_family_up_at_leading_delimiter(self) -> None:
        evaluator = ev("call call exc call exc")
        assert evaluator.hier_family(0, Dir.UP) == [3, 4, 5]
        assert evaluator.hier_context(4, Dir.UP) == 0

    def test_hier_family_down(self) -> None:
        evaluator = ev("call call call exc")
        assert evaluator.hier_family(4, Dir.DOWN) == [1, 2]
        assert evaluator.hier_context(1, Dir.DOWN) == 4
        assert evaluator.hier_context(3, Dir.DOWN) is None


class TestSemantics:
    def test_atoms(self) -> None:
        word = parse_word_literal(M, "call ret{p}")
        assert satisfies(word, Atom("call"))
        assert not satisfies(word, Atom("p"))
        evaluator = Evaluator(word)
        assert evaluator.eval(Atom("p"), 2)
        assert evaluator.eval(Atom("#"), 0)
        assert evaluator.eval(Atom("#"), 3)
        assert not evaluator.eval(Atom("call"), 0)

    def test_next_both_directions(self) -> None:
        evaluator = ev("call ret")
        # call =. ret: compatible with both directions
        assert evaluator.eval(parse_formula("Nd ret"), 1)
        assert evaluator.eval(parse_formula("Nu ret"), 1)
        evaluator = ev("call call ret ret")
        assert evaluator.eval(parse_formula("Nd call"), 1)
        assert not evaluator.eval(parse_formula("Nu call"), 1)
        # ret .> ret: only upward
        assert evaluator.eval(parse_formula("Nu ret"), 3)
        assert not evaluator.eval(parse_formula("Nd ret"), 3)

    def test_weak_next_vacuous_at_end(self) -> None:
        evaluator = ev("call ret")
        assert evaluator.eval(parse_formula("WNd false"), 3)
        assert not evaluator.eval(parse_formula("Nd true"), 3)

    def test_chain_next(self) -> None:
        evaluator = Evaluator(W_EX)
        # chains from 1: (1,5) yields, (1,7) equals
        assert evaluator.eval(parse_formula("CNd call"), 1)
        assert evaluator.eval(parse_formula("CNd ret"), 1)  # via (1,7), equals
        assert evaluator.eval(parse_formula("CNu ret"), 1)  # equals is shared
        assert not evaluator.eval(parse_formula("CNu call"), 1)
        # chains from 2: (2,4) equals
        assert evaluator.eval(parse_formula("CNu exc"), 2)
        assert evaluator.eval(parse_formula("CNd exc"), 2)

    def test_weak_chain_next(self) -> None:
        evaluator = Evaluator(W_EX)
        assert evaluator.eval(parse_formula("WCNd (call || ret)"), 1)
        assert not evaluator.eval(parse_formula("WCNd call"), 1)
        # no chains start at 3: weak holds, strong fails
        assert evaluator.eval(parse_formula("WCNd false"), 3)
        assert not evaluator.eval(parse_formula("CNd true"), 3)

    def test_summary_until(self) -> None:
        evaluator = Evaluator(W_EX)
        # down path 1 -> 5 -> 6 carries calls to the matched ret
        assert evaluator.eval(parse_formula("call Ud ret"), 1)
        # up path 2 -> 4 -> 5 -> 6 -> 7
        assert evaluator.eval(parse_formula("(han || exc || call || ret) Uu ret"), 2)
        # the only path to the exc at 4 passes the han at 2, where call fails
        assert evaluator.eval(parse_formula("(call || han) Ud exc"), 1)
        assert not evaluator.eval(parse_formula("call Ud exc"), 1)

    def test_summary_release(self) -> None:
        evaluator = Evaluator(W_EX)
        # release with an unreachable right side holds vacuously only via left
        assert evaluator.eval(parse_formula("call Rd call"), 1)
        assert evaluator.eval(nnf(parse_formula("! (true Ud exc)")), 5)

    def test_hier_next_up(self) -> None:
        evaluator = ev("call call exc call exc")
        assert evaluator.eval(parse_formula("HNu call"), 3)
        assert evaluator.eval(parse_formula("HNu exc"), 4)
        assert not evaluator.eval(parse_formula("HNu true"), 5)
        assert evaluator.eval(parse_formula("WHNu false"), 5)
        # non-members are never hierarchical-next hosts
        assert not evaluator.eval(parse_formula("HNu true"), 1)
        assert evaluator.eval(parse_formula("WHNu false"), 1)

    def test_hier_next_down(self) -> None:
        evaluator = ev("call call{p} call exc")
        assert evaluator.eval(parse_formula("HNd p"), 1)
        assert not evaluator.eval(parse_formula("HNd true"), 2)
        assert evaluator.eval(parse_formula("WHNd false"), 2)

    def test_hier_until(self) -> None:
        evaluator = ev("call call{p} call exc")
        assert evaluator.eval(parse_formula("true HUd p"), 1)
        assert evaluator.eval(parse_formula("call HUd p"), 1)
        assert not evaluator.eval(parse_formula("false HUd p"), 1)
        # position 3 is not a family member: hierarchical until is false there
        assert not evaluator.eval(parse_formula("true HUd true"), 3)
        # ... and hierarchical release is true there
        assert evaluator.eval(parse_formula("false HRd false"), 3)

    def test_globally(self) -> None:
        word = parse_word_literal(M, "call{p} ret{p}")
        assert satisfies(word, parse_formula("G p"))
        assert not satisfies(word, parse_formula("G call"))
        empty = OpWord(M, ())
        assert satisfies(empty, parse_formula("G false"))

    def test_empty_word(self) -> None:
        empty = OpWord(M, ())
        assert satisfies(empty, parse_formula("#"))
        assert satisfies(empty, parse_formula("WNd false"))
        assert not satisfies(empty, parse_formula("call"))
        assert not satisfies(empty, parse_formula("Nd true"))

    def test_reference_formula_on_witness(self) -> None:
        word = parse_word_literal(M, "call call ret call{p} exc")
        f = parse_formula("CNd call && CNu exc && WCNd p")
        assert satisfies(word, f)
        bare = parse_word_literal(M, "call call ret call exc")
        assert not satisfies(bare, f)


class TestWordLiterals:
    def test_round_trip(self) -> None:
        text = "call han{p,q} call exc{p} call ret ret"
        assert render_word(parse_word_literal(M, text)) == text

    def test_bad_symbol(self) -> None:
        with pytest.raises(Exception):
            parse_word_literal(M, "call qux")


class TestEnumeration:
    def test_singleton_count(self) -> None:
        words = [w for w in enumerate_opwords(M, [], 1)]
        assert len(words) == 4

    def test_bruteforce_sat(self) -> None:
        found = is_satisfiable_bruteforce(parse_formula("CNu exc"), M, [], 4)
        assert found is not None
        assert satisfies(found, parse_formula("CNu exc"))
        assert (
            is_satisfiable_bruteforce(parse_formula("call && ret"), M, [], 3) is None
        )

    def test_bruteforce_sat_empty_word(self) -> None:
        found = is_satisfiable_bruteforce(parse_formula("G false"), M, [], 2)
        assert found is not None
        assert found.body == ()
