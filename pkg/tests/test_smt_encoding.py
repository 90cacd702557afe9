"""Bounded SMT satisfiability: verdicts, witnesses, hygiene, agreement."""

import pytest

from opmc.op_alphabet import mcall
from opmc.potl import (
    is_satisfiable_bruteforce,
    parse_formula,
    render_word,
    satisfies,
)
from opmc.smt_encoding import EncodingError, FormulaEncoding, smt_sat
from opmc.solver import SolverNotFound, SolverSession, resolve_solver
from opmc.terms import iter_symbols, parse_all

from tests.test_tableau import (
    AGREEMENT_POOL,
    ANCHORED_CHAIN_FORMULA,
    CHAIN_FORMULA,
)


def _solver_available() -> bool:
    try:
        resolve_solver(None)
        return True
    except SolverNotFound:
        return False


needs_solver = pytest.mark.skipif(
    not _solver_available(), reason="no SMT solver available"
)


def smt(text, aps=("p",), max_k=12):
    return smt_sat(mcall(), parse_formula(text), aps, max_k=max_k)


def brute(text, aps=("p",), max_len=6):
    return is_satisfiable_bruteforce(parse_formula(text), mcall(), aps, max_len)


@needs_solver
class TestSmallVerdicts:
    def test_single_symbol_word(self):
        out = smt("call")
        assert out.status == "sat"
        assert out.bound == 3
        assert render_word(out.witness) == "call"

    def test_two_structural_symbols_clash(self):
        out = smt("call && ret")
        assert out.status == "unsat"
        assert out.bound == 1

    def test_empty_word(self):
        out = smt("#")
        assert out.status == "sat"
        assert out.bound == 1
        assert out.witness.body == ()

    def test_adjacent_down_step(self):
        out = smt("Nd p")
        assert out.status == "sat"
        assert satisfies(out.witness, parse_formula("Nd p"))

    def test_up_member_impossible_at_first_position(self):
        assert smt("call HUu call").status == "unsat"

    def test_contradictory_next_obligations(self):
        out = smt("G (call --> Nd ret) && call && Nd call")
        assert out.status == "unsat"
        assert out.bound <= 3

    def test_starved_eventuality_stays_open(self):
        # nothing contradicts locally, so the bounded search cannot
        # close the branch space; the verdict is a budget exhaustion
        assert smt("F (p && ! p)", max_k=4).status == "budget"

    def test_witness_keeps_open_frames_until_the_end(self):
        out = smt("CNd exc")
        assert out.status == "sat"
        assert satisfies(out.witness, parse_formula("CNd exc"))


@needs_solver
class TestChainBranchBounds:
    """First accepting bounds match the explicit-search branch sizes."""

    def test_unanchored_first_bound_is_nine(self):
        out = smt(CHAIN_FORMULA, max_k=14)
        assert out.status == "sat"
        assert out.bound == 9
        assert satisfies(out.witness, parse_formula(CHAIN_FORMULA))

    def test_anchored_first_bound_is_ten(self):
        out = smt(ANCHORED_CHAIN_FORMULA, max_k=14)
        assert out.status == "sat"
        assert out.bound == 10
        word = out.witness
        assert word.body[0][0] == "call"
        assert satisfies(word, parse_formula(ANCHORED_CHAIN_FORMULA))

    def test_acceptance_is_monotone_in_the_bound(self):
        # a shorter branch is padded by repeating the accepted node, so
        # the accepting problem stays satisfiable at larger bounds
        enc = FormulaEncoding(mcall(), parse_formula("call"), (), max_k=6)
        body = enc.full_script(6).rsplit("(check-sat)", 1)[0]
        with SolverSession() as s:
            s.send_script(body)
            assert s.check_sat().is_sat


@needs_solver
class TestGuardRegressions:
    def test_weak_chain_obligation_does_not_leak_to_non_pops(self):
        # a weak chain obligation must only deliver at closing steps of
        # its own context; over-eager delivery makes this unsatisfiable
        text = "call && (WCNd ret) && Nd (Nd call)"
        out = smt(text)
        expected = brute(text) is not None
        assert (out.status == "sat") == expected
        if out.status == "sat":
            assert satisfies(out.witness, parse_formula(text))

    def test_weak_next_delivers_at_the_delimiter(self):
        # an up-step into the delimiter carries weak obligations there,
        # where propositions cannot hold
        out = smt("call && WNu p && ! (Nu #)")
        expected = brute("call && WNu p && ! (Nu #)") is not None
        assert (out.status == "sat") == expected


@needs_solver
class TestOracleAgreement:
    @pytest.mark.parametrize(
        "text,aps", AGREEMENT_POOL, ids=[t for t, _ in AGREEMENT_POOL]
    )
    def test_agreement_with_exhaustive_search(self, text, aps):
        formula = parse_formula(text)
        word = is_satisfiable_bruteforce(formula, mcall(), aps, 6)
        out = smt(text, aps=aps, max_k=12)
        if out.status == "sat":
            assert satisfies(out.witness, formula)
            if len(out.witness.body) <= 6:
                assert word is not None
        else:
            assert word is None


@needs_solver
class TestIncrementalMatchesOneShot:
    @pytest.mark.parametrize("text", ["Nd han", "CNu exc", "call Ud exc"])
    def test_first_bound_agrees_with_standalone_scripts(self, text):
        out = smt(text, aps=())
        assert out.status == "sat"
        enc = FormulaEncoding(mcall(), parse_formula(text), (), max_k=12)

        def one_shot(k: int) -> bool:
            script = enc.full_script(k)
            body = script.rsplit("(check-sat)", 1)[0]
            with SolverSession() as s:
                s.send_script(body)
                return s.check_sat().is_sat

        assert one_shot(out.bound) is True
        if out.bound > 1:
            assert one_shot(out.bound - 1) is False


class TestScriptHygiene:
    def _script(self) -> str:
        text = (
            "G ((call && p) --> (CNu (exc || ret)))"
            " && (han HUd call) && F (WHNu p)"
        )
        enc = FormulaEncoding(
            mcall(), parse_formula(text), ("p", "q"), max_k=9
        )
        return enc.full_script(7)

    def test_emission_is_deterministic(self):
        assert self._script() == self._script()

    def test_script_is_quantifier_free(self):
        terms = parse_all(self._script())
        symbols = {s for t in terms for s in iter_symbols(t)}
        assert "forall" not in symbols
        assert "exists" not in symbols

    def test_script_reparses_as_sexpressions(self):
        terms = parse_all(self._script())
        assert len(terms) > 100
        assert terms[0] == ("set-logic", "QF_UFBV")
        assert terms[-1] == ("check-sat",)

    def test_sections_come_in_order(self):
        lines = self._script().splitlines()
        markers = [ln for ln in lines if ln.startswith("; ")]
        tail = [m for m in markers if m in ("; base", "; step", "; rejection", "; acceptance")]
        assert tail == ["; base", "; step", "; rejection", "; acceptance"]
        first_assert = next(i for i, ln in enumerate(lines) if ln.startswith("(assert"))
        for i, ln in enumerate(lines):
            if ln.startswith(("(declare-fun", "(define-fun", "(define-sort", "(set-logic")):
                assert i < first_assert

    def test_unknown_atoms_are_rejected(self):
        with pytest.raises(EncodingError):
            FormulaEncoding(mcall(), parse_formula("mystery"), ("p",), max_k=4)

    def test_bound_must_be_positive(self):
        with pytest.raises(EncodingError):
            FormulaEncoding(mcall(), parse_formula("call"), (), max_k=0)
