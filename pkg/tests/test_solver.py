"""Integration tests for the solver session layer.

These talk to a real solver process resolved the same way the command
line tool does, so they double as a check that the environment has a
working backend.
"""

from __future__ import annotations

import shutil
from pathlib import Path

import pytest

from opmc.terms import parse_bv
from opmc.solver import (
    ProtocolError,
    SolverCrashed,
    SolverNotFound,
    SolverSession,
    SolverTimeout,
    _count_commands,
    resolve_solver,
)


def make_session() -> SolverSession:
    return SolverSession()


class TestResolution:
    def test_some_backend_resolves(self) -> None:
        argv, _env = resolve_solver()
        assert argv
        assert Path(argv[0]).exists() or shutil.which(argv[0])

    def test_explicit_bare_z3_gets_stdin_flag(self) -> None:
        argv, _env = resolve_solver("/opt/tools/z3")
        assert argv == ["/opt/tools/z3", "-in"]

    def test_explicit_command_is_verbatim(self) -> None:
        argv, _env = resolve_solver("/opt/tools/z3 -in -st")
        assert argv == ["/opt/tools/z3", "-in", "-st"]

    def test_env_variable_wins_over_path(self, monkeypatch) -> None:
        monkeypatch.setenv("OPMC_SOLVER", "/custom/cvc5")
        argv, _env = resolve_solver()
        assert argv == ["/custom/cvc5", "--incremental"]

    def test_empty_spec_rejected(self) -> None:
        with pytest.raises(SolverNotFound):
            resolve_solver("  ")


class TestCommandCounting:
    def test_counts_top_level_commands(self) -> None:
        script = "(assert (= x y))\n(assert (p))\n; note\n(push 1)\n"
        assert _count_commands(script) == 3

    def test_parens_in_strings_ignored(self) -> None:
        assert _count_commands('(echo "a ( b")') == 1


class TestSession:
    def test_sat_and_values(self) -> None:
        with make_session() as s:
            s.send_script(
                "(set-logic QF_UFBV)\n"
                "(declare-const x (_ BitVec 4))\n"
                "(declare-const p Bool)\n"
                "(assert (= x #b0101))\n"
                "(assert p)\n"
            )
            result = s.check_sat()
            assert result.is_sat
            values = s.get_values(["x", "p"])
            assert parse_bv(values["x"]) == (5, 4)
            assert values["p"] == "true"

    def test_unsat(self) -> None:
        with make_session() as s:
            s.send_script(
                "(set-logic QF_UFBV)\n"
                "(declare-const p Bool)\n"
                "(assert p)\n(assert (not p))\n"
            )
            assert s.check_sat().is_unsat

    def test_push_pop_restores(self) -> None:
        with make_session() as s:
            s.send_script(
                "(set-logic QF_UFBV)\n(declare-const p Bool)\n(assert p)\n"
            )
            assert s.check_sat().is_sat
            s.push()
            s.execute("(assert (not p))")
            assert s.check_sat().is_unsat
            s.pop()
            assert s.check_sat().is_sat
            assert s.scope_depth == 0

    def test_pop_without_push_rejected(self) -> None:
        with make_session() as s:
            with pytest.raises(ProtocolError):
                s.pop()

    def test_uninterpreted_functions(self) -> None:
        with make_session() as s:
            s.send_script(
                "(set-logic QF_UFBV)\n"
                "(declare-fun f ((_ BitVec 2)) (_ BitVec 2))\n"
                "(assert (= (f #b00) #b11))\n"
                "(assert (distinct (f #b00) (f #b01)))\n"
            )
            assert s.check_sat().is_sat
            values = s.get_values([("f", "#b00")])
            assert parse_bv(values["(f #b00)"]) == (3, 2)

    def test_non_solver_fails_the_handshake(self) -> None:
        # cat echoes the handshake command instead of acknowledging it
        with pytest.raises(ProtocolError):
            SolverSession(["/bin/cat"])

    def test_exiting_process_detected(self) -> None:
        with pytest.raises((SolverCrashed, ProtocolError)):
            s = SolverSession(["/bin/true"])
            s.check_sat()

    def test_dead_session_refuses_further_commands(self) -> None:
        s = make_session()
        s._proc.kill()
        s._proc.wait()
        with pytest.raises((SolverCrashed, SolverTimeout)):
            s.check_sat()
        assert not s.alive
        with pytest.raises(SolverCrashed):
            s.execute("(assert true)")
        s.close()


wasm_dir = Path("/root/z3npm/node_modules")


@pytest.mark.skipif(
    not (wasm_dir / "z3-solver").is_dir() or shutil.which("node") is None,
    reason="z3 WebAssembly package not available",
)
class TestWasmPipe:
    def test_wasm_round_trip(self) -> None:
        script = Path(__file__).resolve().parents[1] / "src/opmc/z3wasm_pipe.js"
        session = SolverSession(
            ["node", str(script)],
            extra_env={"NODE_PATH": str(wasm_dir)},
            reply_timeout=120.0,
        )
        with session as s:
            s.send_script(
                "(set-logic QF_UFBV)\n"
                "(declare-const x (_ BitVec 3))\n"
                "(assert (bvult x #b010))\n"
            )
            assert s.check_sat().is_sat
            s.push()
            s.execute("(assert (bvult #b000 x))")
            assert s.check_sat().is_sat
            assert s.get_values(["x"])["x"] == "#b001"
            s.pop()
