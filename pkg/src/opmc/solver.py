"""Incremental SMT solving over a child-process SMT-LIB 2 pipe.

A session feeds commands to an external solver process and keeps the two
sides in lockstep by switching on ``:print-success``: every command is
acknowledged, so protocol drift is detected at the command where it
happens instead of corrupting later replies.

Backends are resolved in a fixed order: an explicit command, the
``OPMC_SOLVER`` environment variable, a ``z3`` or ``cvc5`` binary on the
PATH, and finally a bundled Node.js pipe around the z3 WebAssembly build.
"""

from __future__ import annotations

import os
import selectors
import shlex
import shutil
import subprocess
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .terms import SExpr, SExprError, parse_all, render

_ATOM_REPLIES = ("success", "sat", "unsat", "unknown")


class SolverError(Exception):
    """Base class for solver integration failures."""


class SolverNotFound(SolverError):
    """No usable backend could be resolved."""


class SolverCrashed(SolverError):
    """The child process died or its pipe broke."""


class ProtocolError(SolverError):
    """The solver replied with something the session did not expect."""


class SolverTimeout(SolverError):
    """A reply did not arrive within the deadline."""


@dataclass(frozen=True)
class SolverResult:
    status: str  #: ``sat``, ``unsat``, or ``unknown``
    reason: str | None = None

    @property
    def is_sat(self) -> bool:
        return self.status == "sat"

    @property
    def is_unsat(self) -> bool:
        return self.status == "unsat"


def _wasm_candidates() -> list[Path]:
    dirs = []
    env_dir = os.environ.get("OPMC_Z3WASM_DIR")
    if env_dir:
        dirs.append(Path(env_dir))
    dirs.append(Path("/root/z3npm/node_modules"))
    dirs.append(Path.cwd() / "node_modules")
    return dirs


def resolve_solver(explicit: str | None = None) -> tuple[list[str], dict[str, str]]:
    """The command line and extra environment for the chosen backend.

    A bare ``z3`` or ``cvc5`` binary gets the flags it needs to read
    commands from standard input; explicit multi-word commands are used
    verbatim.
    """
    spec = explicit or os.environ.get("OPMC_SOLVER")
    if spec:
        argv = shlex.split(spec)
        if not argv:
            raise SolverNotFound("empty solver command")
        if len(argv) == 1:
            base = Path(argv[0]).name
            if base.startswith("z3"):
                argv += ["-in"]
            elif base.startswith("cvc5"):
                argv += ["--incremental"]
        return argv, {}
    z3 = shutil.which("z3")
    if z3:
        return [z3, "-in"], {}
    cvc5 = shutil.which("cvc5")
    if cvc5:
        return [cvc5, "--incremental"], {}
    node = shutil.which("node")
    if node:
        script = Path(__file__).with_name("z3wasm_pipe.js")
        for candidate in _wasm_candidates():
            if (candidate / "z3-solver").is_dir():
                return [node, str(script)], {"NODE_PATH": str(candidate)}
    raise SolverNotFound(
        "no SMT backend: install z3 or cvc5, set OPMC_SOLVER, or provide "
        "the z3-solver node package (OPMC_Z3WASM_DIR)"
    )


def _count_commands(script: str) -> int:
    count = 0
    depth = 0
    in_comment = False
    in_quote: str | None = None
    for ch in script:
        if in_comment:
            if ch == "\n":
                in_comment = False
            continue
        if in_quote:
            if ch == in_quote:
                in_quote = None
            continue
        if ch == ";":
            in_comment = True
        elif ch in "|\"":
            in_quote = ch
        elif ch == "(":
            if depth == 0:
                count += 1
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise SExprError("unbalanced script")
    if depth != 0:
        raise SExprError("unbalanced script")
    return count


class SolverSession:
    """One solver process; all methods raise after the session dies."""

    def __init__(
        self,
        command: Sequence[str] | None = None,
        *,
        explicit: str | None = None,
        extra_env: Mapping[str, str] | None = None,
        reply_timeout: float = 600.0,
    ):
        if command is None:
            command, resolved_env = resolve_solver(explicit)
            merged = dict(resolved_env)
            if extra_env:
                merged.update(extra_env)
            extra_env = merged
        self.command = list(command)
        self.reply_timeout = reply_timeout
        self.scope_depth = 0
        self._dead: str | None = None
        env = dict(os.environ)
        if extra_env:
            env.update(extra_env)
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.STDOUT,
                env=env,
                bufsize=0,
            )
        except OSError as exc:
            raise SolverNotFound(f"cannot start {self.command[0]}: {exc}") from exc
        self._selector = selectors.DefaultSelector()
        self._selector.register(self._proc.stdout, selectors.EVENT_READ)
        self._buffer = ""
        self.execute("(set-option :print-success true)")

    # -- low level -----------------------------------------------------

    @property
    def alive(self) -> bool:
        return self._dead is None

    def _die(self, reason: str) -> None:
        self._dead = reason
        try:
            self._proc.kill()
        except OSError:
            pass

    def _require_alive(self) -> None:
        if self._dead is not None:
            raise SolverCrashed(f"solver session is dead: {self._dead}")

    def _write(self, text: str) -> None:
        try:
            self._proc.stdin.write(text.encode())
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self._die(f"pipe broke while writing: {exc}")
            raise SolverCrashed(self._dead) from exc

    def _read_reply(self, timeout: float | None = None) -> str:
        """One reply: a bare word or one balanced parenthesized term."""
        deadline = time.monotonic() + (timeout or self.reply_timeout)
        while True:
            reply = self._take_reply()
            if reply is not None:
                return reply
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self._die("reply deadline exceeded")
                raise SolverTimeout(
                    f"no reply within {timeout or self.reply_timeout} seconds"
                )
            if not self._selector.select(timeout=min(remaining, 1.0)):
                continue
            chunk = os.read(self._proc.stdout.fileno(), 65536)
            if not chunk:
                self._die("solver closed its output")
                code = self._proc.poll()
                raise SolverCrashed(f"solver exited (code {code})")
            self._buffer += chunk.decode(errors="replace")

    def _take_reply(self) -> str | None:
        text = self._buffer.lstrip()
        if not text:
            self._buffer = ""
            return None
        if text.startswith(";"):
            nl = text.find("\n")
            if nl < 0:
                self._buffer = text
                return None
            self._buffer = text[nl + 1 :]
            return self._take_reply()
        if text.startswith("("):
            depth = 0
            in_quote: str | None = None
            for i, ch in enumerate(text):
                if in_quote:
                    if ch == in_quote:
                        in_quote = None
                    continue
                if ch in "|\"":
                    in_quote = ch
                elif ch == "(":
                    depth += 1
                elif ch == ")":
                    depth -= 1
                    if depth == 0:
                        self._buffer = text[i + 1 :]
                        return text[: i + 1]
            self._buffer = text
            return None
        # a bare word runs to the end of its line
        nl = text.find("\n")
        if nl < 0:
            self._buffer = text
            return None
        self._buffer = text[nl + 1 :]
        return text[:nl].strip()

    # -- commands ------------------------------------------------------

    def execute(self, command: str, timeout: float | None = None) -> None:
        """Send one command that must be acknowledged with success."""
        self._require_alive()
        self._write(command.rstrip() + "\n")
        reply = self._read_reply(timeout)
        if reply != "success":
            self._die(f"expected success, got {reply!r}")
            raise ProtocolError(f"solver replied {reply!r} to {command!r}")

    def send_script(self, script: str, timeout: float | None = None) -> None:
        """Send many commands at once and collect every acknowledgement."""
        self._require_alive()
        count = _count_commands(script)
        if count == 0:
            return
        self._write(script.rstrip() + "\n")
        for _ in range(count):
            reply = self._read_reply(timeout)
            if reply != "success":
                self._die(f"expected success, got {reply!r}")
                raise ProtocolError(f"solver replied {reply!r} inside a script")

    def check_sat(self, timeout: float | None = None) -> SolverResult:
        self._require_alive()
        self._write("(check-sat)\n")
        reply = self._read_reply(timeout)
        if reply in ("sat", "unsat"):
            return SolverResult(reply)
        if reply == "unknown":
            return SolverResult("unknown", self._reason_unknown())
        self._die(f"unexpected check-sat reply {reply!r}")
        raise ProtocolError(f"solver replied {reply!r} to check-sat")

    def _reason_unknown(self) -> str | None:
        try:
            self._write("(get-info :reason-unknown)\n")
            reply = self._read_reply()
        except SolverError:
            return None
        try:
            term = parse_all(reply)
        except SExprError:
            return reply
        if term and isinstance(term[0], tuple) and len(term[0]) == 2:
            return render(term[0][1])
        return reply

    def get_values(self, queries: Sequence[SExpr]) -> dict[str, SExpr]:
        """Model values for the query terms, keyed by their rendered text."""
        self._require_alive()
        if not queries:
            return {}
        rendered = [render(q) for q in queries]
        self._write("(get-value (" + " ".join(rendered) + "))\n")
        reply = self._read_reply()
        try:
            term = parse_all(reply)
        except SExprError as exc:
            self._die(f"unreadable get-value reply: {exc}")
            raise ProtocolError(str(exc)) from exc
        if len(term) != 1 or not isinstance(term[0], tuple):
            self._die("malformed get-value reply")
            raise ProtocolError(f"malformed get-value reply {reply!r}")
        out: dict[str, SExpr] = {}
        for pair in term[0]:
            if not isinstance(pair, tuple) or len(pair) != 2:
                self._die("malformed get-value pair")
                raise ProtocolError(f"malformed get-value pair {pair!r}")
            out[render(pair[0])] = pair[1]
        missing = [q for q in rendered if q not in out]
        if missing:
            raise ProtocolError(f"get-value reply misses {missing}")
        return out

    def push(self) -> None:
        self.execute("(push 1)")
        self.scope_depth += 1

    def pop(self) -> None:
        if self.scope_depth <= 0:
            raise ProtocolError("pop without a matching push")
        self.execute("(pop 1)")
        self.scope_depth -= 1

    def close(self) -> None:
        if self._dead is None:
            self._dead = "closed"
            try:
                self._proc.stdin.write(b"(exit)\n")
                self._proc.stdin.flush()
                self._proc.stdin.close()
            except (BrokenPipeError, OSError):
                pass
        try:
            self._proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()
        self._selector.close()

    def __enter__(self) -> "SolverSession":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
