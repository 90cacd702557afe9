"""Operator precedence alphabets and the chain structure they induce on words.

An operator precedence matrix (OPM) assigns at most one precedence relation
(yields, equals, takes) to each ordered pair of structural symbols.  A word
compatible with the matrix carries a unique nesting of chains: context pairs
whose body reduces away under innermost precedence reduction.  Chains are the
backbone for every other component: automata drive their stack off them and
the logic's summary paths jump along them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

#: Delimiter marking both ends of a word.  Never a member of the alphabet.
TERM = "#"


class Prec(enum.Enum):
    """The three precedence relations."""

    YIELDS = "<."
    EQUALS = "=."
    TAKES = ".>"

    @property
    def pretty(self) -> str:
        return {Prec.YIELDS: "⋖", Prec.EQUALS: "≐", Prec.TAKES: "⋗"}[self]

    def __repr__(self) -> str:
        return f"Prec.{self.name}"


class OpalError(ValueError):
    """Raised for malformed matrices or words incompatible with a matrix."""


@dataclass(frozen=True)
class OpMatrix:
    """An operator precedence matrix over a finite alphabet.

    The delimiter ``#`` is implicit: ``# <. a`` and ``a .> #`` for every
    symbol ``a``, while ``(#, #)`` stays undefined.  ``relation`` only holds
    pairs of alphabet symbols.
    """

    symbols: tuple[str, ...]
    relation: dict[tuple[str, str], Prec] = field(hash=False)

    def __post_init__(self) -> None:
        seen = set(self.symbols)
        if len(seen) != len(self.symbols):
            raise OpalError("duplicate symbols in alphabet")
        if TERM in seen:
            raise OpalError("the delimiter # cannot be an alphabet symbol")
        for a, b in self.relation:
            if a not in seen or b not in seen:
                raise OpalError(f"relation entry ({a}, {b}) outside the alphabet")

    def prec(self, a: str, b: str) -> Prec | None:
        """Relation between ``a`` and ``b``, or None where undefined."""
        if a == TERM:
            return None if b == TERM else Prec.YIELDS
        if b == TERM:
            return Prec.TAKES
        return self.relation.get((a, b))

    @property
    def is_complete(self) -> bool:
        """True when every pair of alphabet symbols has a relation."""
        return all((a, b) in self.relation for a in self.symbols for b in self.symbols)

    def check_complete(self) -> None:
        if not self.is_complete:
            missing = [
                (a, b)
                for a in self.symbols
                for b in self.symbols
                if (a, b) not in self.relation
            ]
            raise OpalError(f"matrix is not complete; missing pairs: {missing}")

    def to_text(self) -> str:
        """Serialize to the text format accepted by :func:`parse_matrix`."""
        lines = ["symbols: " + " ".join(self.symbols)]
        for a in self.symbols:
            for b in self.symbols:
                rel = self.relation.get((a, b))
                if rel is not None:
                    lines.append(f"{a} {rel.value} {b}")
        return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> OpMatrix:
    """Parse the matrix text format.

    The first non-empty line is ``symbols: a b c``; every following
    non-empty line is ``a <. b``, ``a =. b`` or ``a .> b``.  Lines starting
    with ``//`` are comments.
    """
    symbols: tuple[str, ...] | None = None
    relation: dict[tuple[str, str], Prec] = {}
    by_token = {p.value: p for p in Prec}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("//"):
            continue
        if symbols is None:
            if not line.startswith("symbols:"):
                raise OpalError(f"line {lineno}: expected 'symbols:' header")
            symbols = tuple(line[len("symbols:") :].split())
            if not symbols:
                raise OpalError(f"line {lineno}: empty alphabet")
            continue
        parts = line.split()
        if len(parts) != 3 or parts[1] not in by_token:
            raise OpalError(f"line {lineno}: expected 'a <. b', 'a =. b' or 'a .> b'")
        a, rel, b = parts
        key = (a, b)
        if key in relation and relation[key] is not by_token[rel]:
            raise OpalError(f"line {lineno}: conflicting relation for ({a}, {b})")
        relation[key] = by_token[rel]
    if symbols is None:
        raise OpalError("missing 'symbols:' header")
    return OpMatrix(symbols, relation)


def mcall() -> OpMatrix:
    """The matrix for procedural traces: calls, returns, handlers, exceptions.

    Calls open nested contexts, returns close them, handler installation
    opens a context closed by the exception it catches, and exceptions
    unwind every call raised below their handler.
    """
    y, e, t = Prec.YIELDS, Prec.EQUALS, Prec.TAKES
    rel = {
        ("call", "call"): y,
        ("call", "ret"): e,
        ("call", "han"): y,
        ("call", "exc"): t,
        ("ret", "call"): t,
        ("ret", "ret"): t,
        ("ret", "han"): t,
        ("ret", "exc"): t,
        ("han", "call"): y,
        ("han", "ret"): t,
        ("han", "han"): y,
        ("han", "exc"): e,
        ("exc", "call"): t,
        ("exc", "ret"): t,
        ("exc", "han"): t,
        ("exc", "exc"): t,
    }
    return OpMatrix(("call", "ret", "han", "exc"), rel)


def symbol_at(body: Sequence[str], i: int) -> str:
    """Symbol at position ``i`` of ``# b1 .. bm #``; 0 and m+1 are ``#``."""
    if i == 0 or i == len(body) + 1:
        return TERM
    if 1 <= i <= len(body):
        return body[i - 1]
    raise IndexError(f"position {i} outside word of body length {len(body)}")


@dataclass(frozen=True)
class Reduction:
    """One innermost reduction step: context pair ``(i, j)`` and its body."""

    left: int
    right: int
    body: tuple[int, ...]


@dataclass(frozen=True)
class ParseResult:
    """Everything the precedence reduction of a word yields.

    ``chains`` holds all context pairs, including the outermost ``(0, m+1)``
    pair when the whole word reduces.  ``steps`` are the reductions in the
    order they were applied.
    """

    body: tuple[str, ...]
    chains: frozenset[tuple[int, int]]
    steps: tuple[Reduction, ...]


def parse_word(matrix: OpMatrix, body: Sequence[str]) -> ParseResult:
    """Reduce a word to ``# #`` and collect its chains.

    Raises :class:`OpalError` if some needed relation is undefined or the
    word does not reduce, i.e. is incompatible with the matrix.
    """
    for sym in body:
        if sym not in matrix.symbols:
            raise OpalError(f"symbol {sym!r} outside the alphabet")
    positions = list(range(len(body) + 2))
    chains: set[tuple[int, int]] = set()
    steps: list[Reduction] = []

    def rel(p: int, q: int) -> Prec | None:
        return matrix.prec(symbol_at(body, p), symbol_at(body, q))

    while len(positions) > 2:
        take_at = None
        for idx in range(len(positions) - 1):
            r = rel(positions[idx], positions[idx + 1])
            if r is None:
                raise OpalError(
                    f"undefined relation between positions "
                    f"{positions[idx]} and {positions[idx + 1]}"
                )
            if r is Prec.TAKES:
                take_at = idx
                break
        if take_at is None:
            raise OpalError("word does not reduce: no takes relation remains")
        start = take_at
        while start > 0 and rel(positions[start - 1], positions[start]) is Prec.EQUALS:
            start -= 1
        if start == 0 or rel(positions[start - 1], positions[start]) is not Prec.YIELDS:
            raise OpalError("word does not reduce: body without a yields context")
        left, right = positions[start - 1], positions[take_at + 1]
        chunk = tuple(positions[start : take_at + 1])
        chains.add((left, right))
        steps.append(Reduction(left, right, chunk))
        del positions[start : take_at + 1]
    return ParseResult(tuple(body), frozenset(chains), tuple(steps))


def chains(matrix: OpMatrix, body: Sequence[str]) -> frozenset[tuple[int, int]]:
    """All chain context pairs of the word, outermost included."""
    return parse_word(matrix, body).chains


def is_chain(matrix: OpMatrix, body: Sequence[str], i: int, j: int) -> bool:
    """Whether positions ``i < j`` form a chain context pair of the word."""
    return (i, j) in chains(matrix, body)


def supported(matrix: OpMatrix, body: Sequence[str]) -> bool:
    """Whether the word is compatible with the matrix (it fully reduces)."""
    try:
        parse_word(matrix, body)
    except OpalError:
        return False
    return True


def render_relations(matrix: OpMatrix, body: Sequence[str], present: Iterable[int] | None = None) -> str:
    """Render remaining positions with the relations between neighbours.

    ``present`` defaults to all positions.  The final ``# #`` configuration
    renders with equals between the delimiters.
    """
    pos = sorted(present) if present is not None else list(range(len(body) + 2))
    parts: list[str] = []
    for idx, p in enumerate(pos):
        parts.append(symbol_at(body, p))
        if idx + 1 < len(pos):
            r = matrix.prec(symbol_at(body, p), symbol_at(body, pos[idx + 1]))
            if r is None and symbol_at(body, p) == TERM == symbol_at(body, pos[idx + 1]):
                r = Prec.EQUALS
            if r is None:
                raise OpalError("undefined relation in rendering")
            parts.append(r.pretty)
    return " ".join(parts)


def reduction_trace(matrix: OpMatrix, body: Sequence[str]) -> list[str]:
    """The rendered configurations of the reduction, first to last.

    Entry 0 shows the whole word; each later entry shows the word after one
    more innermost reduction, ending at ``# =. #``.
    """
    result = parse_word(matrix, body)
    present = set(range(len(body) + 2))
    out = [render_relations(matrix, body, present)]
    for step in result.steps:
        present.difference_update(step.body)
        out.append(render_relations(matrix, body, present))
    return out


def render_brackets(matrix: OpMatrix, body: Sequence[str]) -> str:
    """Render the word with chain bodies bracketed.

    An opening bracket precedes each chain body, outermost chain first; a
    closing bracket follows each body, innermost chain first.  A space
    separates two symbols only when no bracket stands between them.
    """
    result = parse_word(matrix, body)
    opens: dict[int, list[tuple[int, int]]] = {}
    closes: dict[int, list[tuple[int, int]]] = {}
    for i, j in result.chains:
        opens.setdefault(i + 1, []).append((i, j))
        closes.setdefault(j - 1, []).append((i, j))
    for at in opens:
        opens[at].sort(key=lambda c: -c[1])
    for at in closes:
        closes[at].sort(key=lambda c: -c[0])
    parts: list[str] = [TERM]
    for p in range(1, len(body) + 1):
        if p not in opens and parts[-1] not in ("[", "]", TERM):
            parts.append(" ")
        parts.extend("[" * len(opens.get(p, ())))
        parts.append(symbol_at(body, p))
        parts.extend("]" * len(closes.get(p, ())))
    parts.append(TERM)
    return "".join(parts)


def iter_bodies(symbols: Sequence[str], max_len: int, include_empty: bool = True) -> Iterator[tuple[str, ...]]:
    """All words over ``symbols`` up to ``max_len``, shortest first."""
    if include_empty:
        yield ()
    frontier: list[tuple[str, ...]] = [()]
    for _ in range(max_len):
        nxt: list[tuple[str, ...]] = []
        for stem in frontier:
            for sym in symbols:
                word = stem + (sym,)
                yield word
                nxt.append(word)
        frontier = nxt
