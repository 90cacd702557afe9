"""Command line driver: model checking, satisfiability, parsing, benchmarks.

The driver wires the pieces together: programs are parsed and lowered to
guarded automata, formulas are negated and encoded next to the automaton,
and a bounded search either proves the property (the open check closes),
finds a violating run (decoded, replayed, and reported step by step), or
runs out of budget.

Exit codes: 0 the property holds / the formula is satisfiable, 1 a
violation or unsatisfiability was established, 2 the search was
inconclusive, 10 and above an error (11 bad input, 12 solver trouble,
13 a decoded witness failed replay validation).
"""

from __future__ import annotations

import functools
import json
import sys
import time
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - version fallback
    import tomli as tomllib

import click
from dataclasses import dataclass

from .op_alphabet import (
    TERM,
    OpalError,
    OpMatrix,
    mcall,
    parse_word,
    reduction_trace,
    render_brackets,
)
from .potl import (
    Formula,
    FormulaError,
    Not,
    OpWord,
    atoms_of,
    nnf,
    parse_formula,
    parse_word_literal,
    pretty,
    render_word,
    satisfies,
)
from .smt_encoding import EncodingError, FormulaEncoding, bmc_run
from .solver import SolverError
from .tableau import tableau_sat
from .program_model import (
    AssignStep,
    CallStep,
    GuardStep,
    MiniProcError,
    ModelEncoding,
    ProgramAutomaton,
    ReturnStep,
    Ty,
    eval_expr,
    lower_program,
    parse_miniproc,
    print_automaton,
)

#: Bound ceiling used by proof mode when the requested bound is lower.
PROVE_CEILING = 400


class ReplayError(RuntimeError):
    """A decoded violating run failed independent re-validation."""


# ---------------------------------------------------------------------------
# model checking proper


@dataclass(frozen=True)
class TraceStep:
    """One node of a reconstructed violating run."""

    index: int
    kind: str  # push / shift / pop / end
    location: str
    symbol: str | None  # the pending structural symbol; None past the word
    props: frozenset[str]  # labels realized here (consuming nodes only)
    values: dict  # variable valuation on entering this node


@dataclass(frozen=True)
class CheckVerdict:
    """Outcome of one model-checking run."""

    status: str  # holds / violated / inconclusive
    bound: int  # bound at which the outcome was established
    word: OpWord | None = None
    steps: tuple[TraceStep, ...] = ()


def load_model(text: str) -> ProgramAutomaton:
    """Parse program text and lower it over the procedural matrix."""
    return lower_program(parse_miniproc(text), mcall())


def model_check(
    model: ProgramAutomaton | str,
    formula: Formula | str,
    *,
    max_k: int = 50,
    solver: str | None = None,
    prove: bool = False,
    on_bound=None,
) -> CheckVerdict:
    """Check one program model against one formula.

    The negated formula is encoded next to the model and bounds are
    iterated: an accepted joint run is a violation (decoded into a word
    and a step trace, both re-validated independently); when nothing can
    stay alive at a bound, the property holds.  ``prove`` keeps iterating
    past ``max_k`` so the open check gets a chance to close.
    """
    opa = model if isinstance(model, ProgramAutomaton) else load_model(model)
    phi = parse_formula(formula) if isinstance(formula, str) else formula
    known = set(opa.atoms) | set(opa.matrix.symbols) | {TERM}
    unknown = sorted(atoms_of(phi) - known)
    if unknown:
        raise EncodingError(
            f"formula atoms {unknown} name neither a structural symbol nor "
            "a proposition of the model"
        )
    limit = max(max_k, PROVE_CEILING) if prove else max_k
    enc = FormulaEncoding(opa.matrix, Not(phi), sorted(opa.atoms), max_k=limit)
    me = ModelEncoding(opa, enc)
    outcome = bmc_run(enc, [me], max_k=limit, solver=solver, on_bound=on_bound)
    if outcome.status == "unsat":
        return CheckVerdict("holds", outcome.bound)
    if outcome.status == "budget":
        return CheckVerdict("inconclusive", outcome.bound)
    word = outcome.witness
    nodes = outcome.payloads[0]
    goal = nnf(Not(phi))
    steps = reconstruct_trace(opa, goal, word, nodes)
    return CheckVerdict("violated", outcome.bound, word, steps)


def reconstruct_trace(
    opa: ProgramAutomaton,
    goal: Formula,
    word: OpWord,
    nodes,
) -> tuple[TraceStep, ...]:
    """Re-validate a decoded run and shape it into trace steps.

    Three independent checks gate the result: the word must re-parse
    under the matrix, the direct evaluator must confirm ``goal`` at the
    first position, and every node-to-node move must match a transition
    of the program whose guards and assignments hold over the decoded
    values.  Any discrepancy raises :class:`ReplayError`.
    """
    try:
        parse_word(opa.matrix, word.symbols())
    except OpalError as exc:
        raise ReplayError(f"witness word does not re-parse: {exc}") from exc
    if not satisfies(word, goal):
        raise ReplayError(
            "direct evaluation does not confirm the violation on the witness"
        )

    end = next((i for i, nd in enumerate(nodes) if nd["kind"] == "end"), None)
    if end is None:
        raise ReplayError("decoded run never reaches the end of its word")
    live = list(nodes[: end + 1])
    consumed = [
        (nd["symbol"], nd["props"])
        for nd in live
        if nd["kind"] in ("push", "shift")
    ]
    if consumed != list(word.body):
        raise ReplayError("decoded node labels disagree with the witness word")
    final_names = {opa.location_names[f] for f in opa.finals}
    if live[-1]["location"] not in final_names:
        raise ReplayError(
            f"run ends at {live[-1]['location']!r}, not a final location"
        )
    for i in range(len(live) - 1):
        _fired_transition(opa, live, i)

    steps = []
    for i, nd in enumerate(live):
        consuming = nd["kind"] in ("push", "shift")
        steps.append(
            TraceStep(
                index=i + 1,
                kind=nd["kind"],
                location=nd["location"],
                symbol=nd["symbol"] if nd["kind"] != "end" else None,
                props=nd["props"] if consuming else frozenset(),
                values=dict(nd["values"]),
            )
        )
    return tuple(steps)


def _fired_transition(opa: ProgramAutomaton, nodes, i: int):
    """The program transition that moved node ``i`` to ``i + 1``.

    Candidates are filtered by kind, source, target, label (consuming
    moves), and saved location (pops); each survivor is replayed
    concretely and must reproduce the decoded next valuation exactly.
    """
    nd, nxt = nodes[i], nodes[i + 1]
    kind = nd["kind"]
    try:
        src = opa.location(nd["location"])
        tgt = opa.location(nxt["location"])
    except ValueError as exc:
        raise ReplayError(f"unknown location at node {i + 1}") from exc
    push_values = None
    if kind == "push":
        pool = opa.pushes
    elif kind == "shift":
        pool = opa.shifts
    elif kind == "pop":
        pool = opa.pops
        stk = nd["stack"]
        if not 1 <= stk <= i:
            raise ReplayError(f"node {i + 1} pops a bad stack link {stk}")
        push_values = nodes[stk - 1]["values"]
    else:
        raise ReplayError(f"node {i + 1} has kind {kind!r} inside the run")
    pool_atoms = set(opa.label_pool)
    candidates = []
    for tr in pool:
        if tr.source != src or tr.target != tgt:
            continue
        if kind == "pop":
            saved = opa.location(nodes[nd["stack"] - 1]["location"])
            if tr.saved != saved:
                continue
        else:
            structural = set(tr.label) - pool_atoms
            if structural and nd["symbol"] not in structural:
                continue
            if nd["props"] & pool_atoms != set(tr.label) & pool_atoms:
                continue
        candidates.append(tr)
    for tr in candidates:
        env = _replay_steps(opa, tr.steps, nd, push_values)
        if env is not None and all(
            env[q] == nxt["values"][q] for q in opa.variables
        ):
            return tr
    raise ReplayError(
        f"no transition of the program reproduces node {i + 1} "
        f"({kind} at {nd['location']})"
    )


def _replay_steps(opa: ProgramAutomaton, steps, nd, push_values):
    """Run a transition's step list concretely over decoded values.

    Returns the updated environment, or None when some guard fails.
    Nondeterministic assignments take the solver-chosen draw recorded at
    the node, so a successful replay is exact, not modulo choices.
    """
    env = dict(nd["values"])
    for st in steps:
        if isinstance(st, GuardStep):
            if not eval_expr(st.expr, env):
                return None
        elif isinstance(st, AssignStep):
            if st.expr is None:
                raw = nd["draws"][f"{st.target}#{st.draw}"]
                ty = _target_ty(opa, st.target)
                value = _wrap(raw, ty)
            else:
                value = eval_expr(st.expr, env)
            if st.index is None:
                env[st.target] = value
            else:
                idx = eval_expr(st.index, env) % (1 << st.index.ty.width)
                qual = f"{st.target}[{idx}]"
                if qual in opa.variables:
                    env[qual] = value
        elif isinstance(st, CallStep):
            callee = opa.program.function(st.callee)
            bound = {}
            for param, arg in zip(callee.params, st.args):
                qual = f"{st.callee}.{param.name}"
                if param.byref:
                    bound[qual] = env[arg.resolved]
                else:
                    bound[qual] = eval_expr(arg, env)
            for qual in opa.locals_of[st.callee]:
                env[qual] = bound.get(qual, 0)
        elif isinstance(st, ReturnStep):
            site = st.site
            out_vals = {}
            if st.copy_out:
                callee = opa.program.function(site.callee)
                for param, arg in zip(callee.params, site.args):
                    if param.byref:
                        out_vals[arg.resolved] = nd["values"][
                            f"{site.callee}.{param.name}"
                        ]
            if site.caller is not None:
                for qual in opa.locals_of[site.caller]:
                    env[qual] = push_values[qual]
            env.update(out_vals)
        else:  # pragma: no cover - lowering produces no other steps
            raise ReplayError(f"unknown step {st!r}")
    return env


def _target_ty(opa: ProgramAutomaton, target: str) -> Ty:
    if target in opa.variables:
        return opa.variables[target]
    return opa.variables[f"{target}[0]"]


def _wrap(value: int, ty: Ty) -> int:
    mask = (1 << ty.width) - 1
    v = value & mask
    if ty.signed and v >> (ty.width - 1):
        v -= 1 << ty.width
    return v


# ---------------------------------------------------------------------------
# reporting helpers


def _emit(line: str = "") -> None:
    click.echo(line)


def _emit_json(record: dict) -> None:
    click.echo(json.dumps(record, sort_keys=True))


def _kv_block(pairs) -> None:
    width = max(len(k) for k, _ in pairs)
    for key, value in pairs:
        _emit(f"{key.ljust(width)}  {value}")


def _aligned_table(header, rows) -> None:
    widths = [
        max(len(str(r[i])) for r in [header, *rows])
        for i in range(len(header))
    ]
    _emit("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip())
    for row in rows:
        _emit(
            "  ".join(str(c).ljust(w) for c, w in zip(row, widths)).rstrip()
        )


def _values_cell(values: dict) -> str:
    return " ".join(f"{k}={v}" for k, v in sorted(values.items()))


def _trace_rows(steps):
    rows = []
    for st in steps:
        rows.append(
            [
                str(st.index),
                st.kind,
                st.location,
                st.symbol or "-",
                ",".join(sorted(st.props)) or "-",
                _values_cell(st.values),
            ]
        )
    return rows


def emit_check_report(
    model_name: str, formula_text: str, verdict: CheckVerdict, elapsed: float
) -> None:
    """Aligned text first, machine-readable JSON lines after."""
    notes = {
        "holds": "no reachable run violates the formula",
        "violated": "a reachable run violates the formula",
        "inconclusive": "bound exhausted without a verdict",
    }
    _kv_block(
        [
            ("model", model_name),
            ("formula", formula_text),
            ("verdict", verdict.status),
            ("bound", str(verdict.bound)),
            ("time", f"{elapsed:.2f}s"),
            ("note", notes[verdict.status]),
        ]
    )
    if verdict.status == "violated":
        _emit()
        _emit(f"word  {render_word(verdict.word)}")
        _emit()
        _aligned_table(
            ["step", "kind", "location", "symbol", "props", "values"],
            _trace_rows(verdict.steps),
        )
    _emit()
    _emit_json(
        {
            "record": "verdict",
            "command": "check",
            "model": model_name,
            "formula": formula_text,
            "status": verdict.status,
            "bound": verdict.bound,
            "time": round(elapsed, 3),
            "word": render_word(verdict.word) if verdict.word else None,
        }
    )
    for st in verdict.steps:
        _emit_json(
            {
                "record": "step",
                "index": st.index,
                "kind": st.kind,
                "location": st.location,
                "symbol": st.symbol,
                "props": sorted(st.props),
                "values": st.values,
            }
        )


# ---------------------------------------------------------------------------
# click wiring

_CHECK_EXIT = {"holds": 0, "violated": 1, "inconclusive": 2}
_SAT_EXIT = {"satisfiable": 0, "unsatisfiable": 1, "inconclusive": 2}


class ToolError(click.ClickException):
    """Domain failure carrying one of the documented error exit codes."""

    def __init__(self, message: str, exit_code: int = 10):
        super().__init__(message)
        self.exit_code = exit_code


def _guarded(fn):
    @functools.wraps(fn)
    def inner(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ToolError:
            raise
        except ReplayError as exc:
            raise ToolError(str(exc), 13) from exc
        except (MiniProcError, FormulaError, OpalError, EncodingError) as exc:
            raise ToolError(str(exc), 11) from exc
        except SolverError as exc:
            raise ToolError(str(exc), 12) from exc

    return inner


@click.group()
def cli() -> None:
    """Model checking for procedural programs with exceptions."""


@cli.command()
@click.option(
    "--model",
    "model_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="program model file",
)
@click.option("--formula", required=True, help="temporal formula to check")
@click.option("--max-k", default=50, show_default=True, help="bound budget")
@click.option("--solver", default=None, help="solver command to run")
@click.option(
    "--prove",
    is_flag=True,
    help="keep raising the bound until the open check closes",
)
@click.pass_context
@_guarded
def check(ctx, model_path: Path, formula: str, max_k: int, solver, prove):
    """Check a program model against a formula."""
    opa = load_model(model_path.read_text())
    phi = parse_formula(formula)
    started = time.monotonic()
    verdict = model_check(
        opa, phi, max_k=max_k, solver=solver, prove=prove
    )
    emit_check_report(str(model_path), pretty(phi), verdict, time.monotonic() - started)
    ctx.exit(_CHECK_EXIT[verdict.status])


@cli.command("sat")
@click.option("--formula", required=True, help="temporal formula to test")
@click.option(
    "--engine",
    type=click.Choice(["tableau", "smt"]),
    default="smt",
    show_default=True,
)
@click.option("--max-k", default=12, show_default=True, help="bound budget (smt)")
@click.option(
    "--max-nodes", default=40, show_default=True, help="node budget (tableau)"
)
@click.option("--solver", default=None, help="solver command to run (smt)")
@click.pass_context
@_guarded
def sat_command(ctx, formula: str, engine: str, max_k: int, max_nodes: int, solver):
    """Decide satisfiability of a formula over the procedural alphabet."""
    matrix = mcall()
    phi = parse_formula(formula)
    aps = sorted(atoms_of(phi) - set(matrix.symbols) - {TERM})
    started = time.monotonic()
    witness = None
    detail: dict = {}
    if engine == "tableau":
        result = tableau_sat(matrix, phi, aps, max_nodes=max_nodes)
        status = {
            True: "satisfiable",
            False: "unsatisfiable",
            None: "inconclusive",
        }[result.satisfiable]
        witness = result.witness
        detail["nodes_explored"] = result.nodes_explored
        if result.branch is not None:
            detail["branch_length"] = len(result.branch)
    else:
        enc = FormulaEncoding(matrix, phi, aps, max_k=max_k)
        outcome = bmc_run(enc, max_k=max_k, solver=solver)
        status = {
            "sat": "satisfiable",
            "unsat": "unsatisfiable",
            "budget": "inconclusive",
        }[outcome.status]
        witness = outcome.witness
        detail["bound"] = outcome.bound
    elapsed = time.monotonic() - started
    pairs = [
        ("formula", pretty(phi)),
        ("engine", engine),
        ("status", status),
    ]
    pairs += [(k, str(v)) for k, v in sorted(detail.items())]
    if witness is not None:
        pairs.append(("witness", render_word(witness) or "(empty word)"))
    pairs.append(("time", f"{elapsed:.2f}s"))
    _kv_block(pairs)
    _emit()
    _emit_json(
        {
            "record": "sat",
            "command": "sat",
            "formula": pretty(phi),
            "engine": engine,
            "status": status,
            "witness": render_word(witness) if witness is not None else None,
            "time": round(elapsed, 3),
            **detail,
        }
    )
    ctx.exit(_SAT_EXIT[status])


@cli.command("parse")
@click.option(
    "--opm",
    default="mcall",
    show_default=True,
    type=click.Choice(["mcall"]),
    help="precedence matrix to parse under",
)
@click.option("--word", required=True, help="space-separated word body")
@click.pass_context
@_guarded
def parse_command(ctx, opm: str, word: str):
    """Parse a word and show its nesting structure and reductions."""
    matrix = mcall()
    literal = parse_word_literal(matrix, word)
    body = literal.symbols()
    try:
        result = parse_word(matrix, body)
    except OpalError as exc:
        _kv_block([("word", " ".join(body)), ("status", "rejected"), ("reason", str(exc))])
        _emit()
        _emit_json(
            {
                "record": "parse",
                "command": "parse",
                "opm": opm,
                "word": " ".join(body),
                "status": "rejected",
                "reason": str(exc),
            }
        )
        ctx.exit(1)
    chain_list = sorted(result.chains)
    _kv_block(
        [
            ("word", " ".join(body)),
            ("status", "accepted"),
            ("structure", render_brackets(matrix, body)),
            ("chains", " ".join(f"({i},{j})" for i, j in chain_list)),
        ]
    )
    _emit()
    _emit("reduction")
    for line in reduction_trace(matrix, body):
        _emit(f"  {line}")
    _emit()
    _emit_json(
        {
            "record": "parse",
            "command": "parse",
            "opm": opm,
            "word": " ".join(body),
            "status": "accepted",
            "structure": render_brackets(matrix, body),
            "chains": [list(c) for c in chain_list],
        }
    )
    ctx.exit(0)


@cli.command("encode")
@click.option("--formula", required=True, help="temporal formula to encode")
@click.option(
    "--model",
    "model_path",
    default=None,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="program model to encode alongside the formula",
)
@click.option("--k", default=8, show_default=True, help="bound to unroll to")
@click.option(
    "--negate", is_flag=True, help="encode the negation (model-checking form)"
)
@click.option(
    "--out",
    type=click.Path(dir_okay=False, writable=True, path_type=Path),
    default=None,
    help="write the problem here instead of standard output",
)
@click.pass_context
@_guarded
def encode_command(ctx, formula: str, model_path, k: int, negate: bool, out):
    """Write the bounded problem for a formula (and optional model)."""
    matrix = mcall()
    phi = parse_formula(formula)
    if negate:
        phi = Not(phi)
    extras = []
    if model_path is not None:
        opa = load_model(model_path.read_text())
        known = set(opa.atoms) | set(matrix.symbols) | {TERM}
        unknown = sorted(atoms_of(phi) - known)
        if unknown:
            raise EncodingError(
                f"formula atoms {unknown} name neither a structural symbol "
                "nor a proposition of the model"
            )
        enc = FormulaEncoding(matrix, phi, sorted(opa.atoms), max_k=k)
        extras.append(ModelEncoding(opa, enc))
    else:
        aps = sorted(atoms_of(phi) - set(matrix.symbols) - {TERM})
        enc = FormulaEncoding(matrix, phi, aps, max_k=k)
    script = enc.full_script(k, extras)
    if out is None:
        click.echo(script, nl=False)
    else:
        out.write_text(script)
        _kv_block(
            [
                ("formula", pretty(phi)),
                ("bound", str(k)),
                ("output", str(out)),
                ("lines", str(script.count(chr(10)))),
            ]
        )
        _emit()
        _emit_json(
            {
                "record": "encode",
                "command": "encode",
                "formula": pretty(phi),
                "bound": k,
                "output": str(out),
                "lines": script.count(chr(10)),
            }
        )
    ctx.exit(0)


@cli.command("show")
@click.option(
    "--model",
    "model_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="program model file",
)
@click.pass_context
@_guarded
def show_command(ctx, model_path: Path):
    """Print the guarded automaton a program model lowers to."""
    opa = load_model(model_path.read_text())
    click.echo(print_automaton(opa), nl=False)
    ctx.exit(0)


@cli.command("bench")
@click.argument(
    "manifest",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
)
@click.option("--solver", default=None, help="solver command to run")
@click.pass_context
@_guarded
def bench_command(ctx, manifest: Path, solver):
    """Run every entry of a benchmark manifest and report pass/fail."""
    data = tomllib.loads(manifest.read_text())
    entries = data.get("entry", [])
    if not entries:
        raise ToolError(f"no [[entry]] rows in {manifest}", 11)
    base = manifest.parent
    models: dict[Path, ProgramAutomaton] = {}
    rows = []
    records = []
    failures = 0
    for entry in entries:
        name = str(entry.get("name", "?"))
        try:
            model_file = base / str(entry["model"])
            formula_text = str(entry["formula"])
            expect = str(entry.get("expect", ""))
            max_k = int(entry.get("max_k", 50))
            if model_file not in models:
                models[model_file] = load_model(model_file.read_text())
            started = time.monotonic()
            verdict = model_check(
                models[model_file],
                parse_formula(formula_text),
                max_k=max_k,
                solver=solver,
            )
            elapsed = time.monotonic() - started
            ok = verdict.status == expect
            failures += 0 if ok else 1
            rows.append(
                [
                    name,
                    verdict.status,
                    str(verdict.bound),
                    f"{elapsed:.2f}s",
                    "PASS" if ok else f"FAIL (expected {expect})",
                ]
            )
            records.append(
                {
                    "record": "bench",
                    "name": name,
                    "status": verdict.status,
                    "expect": expect,
                    "bound": verdict.bound,
                    "time": round(elapsed, 3),
                    "ok": ok,
                }
            )
        except (
            KeyError,
            OSError,
            MiniProcError,
            FormulaError,
            OpalError,
            EncodingError,
            SolverError,
            ReplayError,
        ) as exc:
            failures += 1
            rows.append([name, "error", "-", "-", f"FAIL ({exc})"])
            records.append(
                {
                    "record": "bench",
                    "name": name,
                    "status": "error",
                    "error": str(exc),
                    "ok": False,
                }
            )
    _aligned_table(["name", "verdict", "k", "time", "result"], rows)
    _emit()
    passed = len(rows) - failures
    _emit(f"{passed}/{len(rows)} entries passed")
    _emit()
    for record in records:
        _emit_json(record)
    _emit_json(
        {
            "record": "summary",
            "command": "bench",
            "total": len(rows),
            "passed": passed,
            "failed": failures,
        }
    )
    ctx.exit(0 if failures == 0 else 1)


def main(argv=None) -> int:
    """Entry point returning the documented exit codes."""
    try:
        rv = cli.main(args=argv, prog_name="opmc", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except ToolError as exc:
        exc.show(file=sys.stderr)
        return exc.exit_code
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 10
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return 10
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
