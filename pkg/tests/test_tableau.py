"""Tests for the explicit tableau engine.

The worked accepting branch for the chain-next conjunction formula is
checked node by node, and the engine is cross-checked against the direct
semantics on a pool of formulas covering every operator family: every
reported witness must satisfy its formula, and every formula for which a
short model exists must be reported satisfiable.
"""

from __future__ import annotations

import functools

import pytest

from opmc.op_alphabet import TERM, mcall
from opmc.potl import (
    Atom,
    ChainNext,
    Dir,
    Evaluator,
    WChainNext,
    parse_formula,
    parse_word_literal,
    render_word,
)
from opmc.tableau import POP, PUSH, SHIFT, Node, tableau_sat

M = mcall()


def sat(text: str, aps=(), max_nodes: int = 40):
    return tableau_sat(M, parse_formula(text), aps=aps, max_nodes=max_nodes)


CHAIN_FORMULA = "(CNd call) && (CNu exc) && (WCNd p)"
ANCHORED_CHAIN_FORMULA = "call && (CNd call) && (CNu exc) && (WCNd p)"


@functools.cache
def chain_result():
    return sat(CHAIN_FORMULA, aps=("p",))


@functools.cache
def anchored_chain_result():
    return sat(ANCHORED_CHAIN_FORMULA, aps=("p",))


class TestMinimalChainBranch:
    """Smallest accepting branch for CNd call && CNu exc && WCNd p.

    A han-rooted word supports both chain obligations from position 1
    with one chain fewer than any call-rooted word, because han and exc
    are in the equal relation and the trailing equal merges the final
    closes.  Iterative deepening therefore returns the nine-node branch.
    """

    def test_satisfiable(self):
        assert chain_result().satisfiable is True

    def test_branch_has_nine_step_nodes(self):
        assert len(chain_result().branch) == 9

    def test_witness_word(self):
        assert render_word(chain_result().witness) == "han call ret call{p} exc{p}"

    def test_witness_replays_in_direct_semantics(self):
        formula = parse_formula(CHAIN_FORMULA)
        assert Evaluator(chain_result().witness).eval(formula, 1)


class TestAnchoredChainBranch:
    """Worked branch for the call-rooted chain-next conjunction.

    Anchoring position 1 to call forces the ten-step-node branch whose
    nodes are checked one by one below: two chains land on position 4
    and 5 closes, and the final pop run unwinds through the call left
    context before the delimiter is read.
    """

    def test_satisfiable(self):
        assert anchored_chain_result().satisfiable is True

    def test_branch_has_ten_step_nodes(self):
        assert len(anchored_chain_result().branch) == 10

    def test_witness_word(self):
        word = anchored_chain_result().witness
        assert render_word(word) == "call call ret call{p} exc"

    def test_witness_replays_in_direct_semantics(self):
        formula = parse_formula(ANCHORED_CHAIN_FORMULA)
        assert Evaluator(anchored_chain_result().witness).eval(formula, 1)

    def test_branch_nodes(self):
        call, ret, exc, p = Atom("call"), Atom("ret"), Atom("exc"), Atom("p")
        term = Atom(TERM)
        cnd = ChainNext(Dir.DOWN, call)
        cnu = ChainNext(Dir.UP, exc)
        wcnd = WChainNext(Dir.DOWN, p)
        expected = [
            Node(frozenset({call, cnd, cnu, wcnd}), TERM, None, None, PUSH),
            Node(frozenset({call}), "call", 0, None, PUSH),
            Node(frozenset({ret}), "call", 1, 0, SHIFT),
            Node(frozenset({call}), "ret", 1, 0, POP),
            Node(frozenset({call, p}), "call", 0, None, PUSH),
            Node(frozenset({exc}), "call", 4, 0, POP),
            Node(frozenset({exc}), "call", 0, None, POP),
            Node(frozenset({exc}), TERM, None, None, PUSH),
            Node(frozenset({term}), "exc", 7, None, POP),
            Node(frozenset({term}), TERM, None, None, None),
        ]
        assert list(anchored_chain_result().branch) == expected


class TestSmallVerdicts:
    def test_delimiter_formula_accepts_empty_word(self):
        result = sat("#")
        assert result.satisfiable is True
        assert result.witness.body == ()
        assert len(result.branch) == 1

    def test_two_structural_symbols_unsatisfiable(self):
        assert sat("call && ret").satisfiable is False

    def test_literal_contradiction_unsatisfiable(self):
        assert sat("p && !p", aps=("p",)).satisfiable is False

    def test_false_unsatisfiable(self):
        assert sat("false").satisfiable is False

    def test_conflicting_next_obligations_unsatisfiable(self):
        assert sat("call && (Nd han) && (Nu han)").satisfiable is False

    def test_up_next_at_first_position_unsatisfiable(self):
        assert sat("HNu call").satisfiable is False

    def test_globally_false_holds_on_empty_word(self):
        result = sat("G false")
        assert result.satisfiable is True
        assert result.witness.body == ()

    def test_eventually_needs_a_position(self):
        result = sat("F true")
        assert result.satisfiable is True
        # the delimiter alone cannot witness an eventuality
        assert result.witness.body != ()

    def test_eventually_finds_late_position(self):
        result = sat("F (p && exc)", aps=("p",))
        assert result.satisfiable is True
        assert Evaluator(result.witness).eval(parse_formula("F (p && exc)"), 1)

    def test_simple_atom(self):
        result = sat("call")
        assert result.satisfiable is True
        assert [s for s, _ in result.witness.body][0] == "call"


AGREEMENT_POOL = [
    ("call", ()),
    ("ret", ()),
    ("exc && p", ("p",)),
    ("Nd han", ()),
    ("Nu ret", ()),
    ("WNd p && call", ("p",)),
    ("WNu exc", ()),
    ("CNd call", ()),
    ("CNu exc", ()),
    ("WCNd p && CNd ret", ("p",)),
    ("call Ud exc", ()),
    ("(call || han) Ud exc", ()),
    ("call Uu ret", ()),
    ("true Rd p", ("p",)),
    ("false Ru #", ()),
    ("HNd call", ()),
    ("WHNd p", ("p",)),
    ("call HUd call", ()),
    ("call HUu call", ()),
    ("false HRd p", ("p",)),
    ("false HRu p", ("p",)),
    ("G call", ()),
    ("G (call --> Nd (ret || han || call || exc))", ()),
    ("(Nd (Nd exc)) && call", ()),
    ("han && Nd (call Uu exc)", ()),
    ("F exc", ()),
    ("F (p && ret)", ("p",)),
    ("G (call --> F (ret || exc))", ()),
    ("Nd (G p)", ("p",)),
    ("! (F p)", ("p",)),
    ("call && F (han && Nd exc)", ()),
]


class TestOracleAgreement:
    @pytest.mark.parametrize("text,aps", AGREEMENT_POOL, ids=[t for t, _ in AGREEMENT_POOL])
    def test_agreement(self, text, aps):
        from opmc.potl import enumerate_opwords, parse_formula

        formula = parse_formula(text)
        result = tableau_sat(M, formula, aps=aps, max_nodes=24)
        assert result.satisfiable is not None, "node budget exhausted"
        brute_words = [
            w
            for w in enumerate_opwords(M, aps, 4, include_empty=True)
            if Evaluator(w).eval(formula, 1)
        ]
        if result.satisfiable:
            assert Evaluator(result.witness).eval(formula, 1), render_word(
                result.witness
            )
        else:
            assert not brute_words, render_word(brute_words[0])
        if brute_words:
            assert result.satisfiable is True


class TestHierarchicalWitnesses:
    def test_down_next_witness(self):
        result = sat("HNd call")
        assert result.satisfiable is True
        ev = Evaluator(result.witness)
        assert ev.eval(parse_formula("HNd call"), 1)

    def test_up_until_needs_family_membership(self):
        # No chain can end at position 1, so position 1 is never part of
        # an up-hierarchical family and the until has no base case there.
        assert sat("call HUu call").satisfiable is False

    def test_up_until_witness_inside_family(self):
        result = sat("Nu (call HUu call)")
        assert result.satisfiable is True
        ev = Evaluator(result.witness)
        assert ev.eval(parse_formula("Nu (call HUu call)"), 1)
