"""Operator precedence automata.

An automaton over a precedence matrix drives its stack purely off the
matrix: the relation between the topmost stack symbol and the lookahead
dictates whether the move is a push, a shift (replace the top symbol,
keep the stored state) or a pop (consume no input).  Acceptance requires
consuming the word, emptying the stack through the trailing delimiter,
and landing in a final state.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Hashable, Iterator, Mapping, Sequence

from .op_alphabet import OpMatrix, Prec, TERM, iter_bodies

State = Hashable
#: Stack entries pair the pushed-or-shifted symbol with the state saved at push.
StackEntry = tuple[str, State]
Config = tuple[State, tuple[StackEntry, ...]]


@dataclass(frozen=True)
class Opa:
    """A nondeterministic operator precedence automaton."""

    matrix: OpMatrix
    states: frozenset[State]
    initials: frozenset[State]
    finals: frozenset[State]
    push: Mapping[tuple[State, str], frozenset[State]] = field(hash=False)
    shift: Mapping[tuple[State, str], frozenset[State]] = field(hash=False)
    pop: Mapping[tuple[State, State], frozenset[State]] = field(hash=False)

    def __post_init__(self) -> None:
        if not self.initials <= self.states or not self.finals <= self.states:
            raise ValueError("initial and final states must be states")

    @classmethod
    def trivial(cls, matrix: OpMatrix) -> "Opa":
        """The one-state automaton accepting every supported word."""
        q = "q"
        states = frozenset([q])
        moves = {(q, a): states for a in matrix.symbols}
        return cls(
            matrix=matrix,
            states=states,
            initials=states,
            finals=states,
            push=moves,
            shift=moves,
            pop={(q, q): states},
        )

    def successors(self, config: Config, lookahead: str) -> Iterator[tuple[Config, bool]]:
        """Successor configs under the lookahead; the flag marks consumption.

        Pop moves never consume.  A missing relation or transition yields
        nothing: the run is stuck.
        """
        state, stack = config
        top = stack[-1][0] if stack else TERM
        rel = self.matrix.prec(top, lookahead)
        if rel is None:
            return
        if rel is Prec.TAKES:
            if not stack:
                return
            saved = stack[-1][1]
            for nxt in self.pop.get((state, saved), ()):
                yield (nxt, stack[:-1]), False
            return
        if lookahead == TERM:
            return
        if rel is Prec.YIELDS:
            for nxt in self.push.get((state, lookahead), ()):
                yield (nxt, stack + ((lookahead, state),)), True
        else:
            saved = stack[-1][1]
            for nxt in self.shift.get((state, lookahead), ()):
                yield (nxt, stack[:-1] + ((lookahead, saved),)), True

    def _final_configs(self, body: Sequence[str]) -> Iterator[Config]:
        """All configs with the input consumed and the stack emptied."""
        seen: set[tuple[int, Config]] = set()
        queue: deque[tuple[int, Config]] = deque(
            (0, (q, ())) for q in sorted(self.initials, key=repr)
        )
        while queue:
            pos, config = queue.popleft()
            if (pos, config) in seen:
                continue
            seen.add((pos, config))
            if pos == len(body) and not config[1]:
                yield config
                continue
            lookahead = body[pos] if pos < len(body) else TERM
            for nxt, consumed in self.successors(config, lookahead):
                queue.append((pos + 1 if consumed else pos, nxt))

    def accepts(self, body: Sequence[str]) -> bool:
        """Whether some run consumes the word, empties the stack, and ends final."""
        return any(state in self.finals for state, _ in self._final_configs(body))

    def supports(self, body: Sequence[str]) -> bool:
        """Whether some run consumes the word and empties the stack."""
        return any(True for _ in self._final_configs(body))

    def language(self, max_len: int, include_empty: bool = True) -> Iterator[tuple[str, ...]]:
        """All accepted words up to the length bound, shortest first."""
        for body in iter_bodies(self.matrix.symbols, max_len, include_empty):
            if self.accepts(body):
                yield body
