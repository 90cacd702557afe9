"""Precedence-oriented temporal logic: syntax, normal forms, and semantics.

Formulas talk about positions of a word structured by a precedence matrix.
Beyond the usual boolean connectives they offer, per direction (down = into
nested contexts, up = out of them):

* next / weak next over precedence-compatible adjacent positions,
* chain next / weak chain next jumping along chain context pairs,
* summary until / release over downward (upward) summary paths, which mix
  adjacent steps and maximal chain jumps,
* hierarchical next / weak next / until / release over the families of
  positions sharing one chain context.

``G`` and ``F`` quantify over the body positions from the current one on,
stepping through both precedence directions at once.  The word-level
evaluator here is deliberately direct and independent of the tableau and
SMT engines; it serves as their semantic oracle.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator, Sequence

from .op_alphabet import OpMatrix, OpalError, Prec, TERM, iter_bodies, parse_word


class Dir(enum.Enum):
    DOWN = "d"
    UP = "u"

    @property
    def other(self) -> "Dir":
        return Dir.UP if self is Dir.DOWN else Dir.DOWN


@dataclass(frozen=True)
class Formula:
    """Base class; all nodes are immutable and hashable."""

    def __str__(self) -> str:
        return pretty(self)


@dataclass(frozen=True)
class Atom(Formula):
    """A structural symbol, an atomic proposition, or the delimiter ``#``."""

    name: str


@dataclass(frozen=True)
class TrueConst(Formula):
    pass


@dataclass(frozen=True)
class FalseConst(Formula):
    pass


@dataclass(frozen=True)
class Not(Formula):
    arg: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Next(Formula):
    dir: Dir
    arg: Formula


@dataclass(frozen=True)
class WNext(Formula):
    dir: Dir
    arg: Formula


@dataclass(frozen=True)
class ChainNext(Formula):
    dir: Dir
    arg: Formula


@dataclass(frozen=True)
class WChainNext(Formula):
    dir: Dir
    arg: Formula


@dataclass(frozen=True)
class Until(Formula):
    dir: Dir
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Release(Formula):
    dir: Dir
    left: Formula
    right: Formula


@dataclass(frozen=True)
class HNext(Formula):
    dir: Dir
    arg: Formula


@dataclass(frozen=True)
class WHNext(Formula):
    dir: Dir
    arg: Formula


@dataclass(frozen=True)
class HUntil(Formula):
    dir: Dir
    left: Formula
    right: Formula


@dataclass(frozen=True)
class HRelease(Formula):
    dir: Dir
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Globally(Formula):
    """The argument holds at every body position from here on."""

    arg: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    """The argument holds at some body position from here on."""

    arg: Formula


@dataclass(frozen=True)
class Zeta(Formula):
    """Internal marker: the position belongs to a hierarchical family.

    Down: the position shares a right chain context it takes precedence
    over; up: it shares a left chain context yielding precedence to it.
    Never produced by the surface parser.
    """

    dir: Dir


_PREFIX_OPS: dict[str, Callable[[Formula], Formula]] = {
    "Nd": lambda a: Next(Dir.DOWN, a),
    "Nu": lambda a: Next(Dir.UP, a),
    "WNd": lambda a: WNext(Dir.DOWN, a),
    "WNu": lambda a: WNext(Dir.UP, a),
    "CNd": lambda a: ChainNext(Dir.DOWN, a),
    "CNu": lambda a: ChainNext(Dir.UP, a),
    "WCNd": lambda a: WChainNext(Dir.DOWN, a),
    "WCNu": lambda a: WChainNext(Dir.UP, a),
    "HNd": lambda a: HNext(Dir.DOWN, a),
    "HNu": lambda a: HNext(Dir.UP, a),
    "WHNd": lambda a: WHNext(Dir.DOWN, a),
    "WHNu": lambda a: WHNext(Dir.UP, a),
}

_INFIX_OPS: dict[str, Callable[[Formula, Formula], Formula]] = {
    "Ud": lambda l, r: Until(Dir.DOWN, l, r),
    "Uu": lambda l, r: Until(Dir.UP, l, r),
    "Rd": lambda l, r: Release(Dir.DOWN, l, r),
    "Ru": lambda l, r: Release(Dir.UP, l, r),
    "HUd": lambda l, r: HUntil(Dir.DOWN, l, r),
    "HUu": lambda l, r: HUntil(Dir.UP, l, r),
    "HRd": lambda l, r: HRelease(Dir.DOWN, l, r),
    "HRu": lambda l, r: HRelease(Dir.UP, l, r),
}

_RESERVED = set(_PREFIX_OPS) | set(_INFIX_OPS) | {"G", "F", "true", "false"}


class FormulaError(ValueError):
    """Raised for unparsable or ill-formed formulas."""


def _tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "()#":
            tokens.append(ch)
            i += 1
            continue
        if text.startswith("-->", i):
            tokens.append("-->")
            i += 3
            continue
        if text.startswith("&&", i):
            tokens.append("&&")
            i += 2
            continue
        if text.startswith("||", i):
            tokens.append("||")
            i += 2
            continue
        if ch == "!":
            tokens.append("!")
            i += 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < len(text) and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(text[i:j])
            i = j
            continue
        raise FormulaError(f"unexpected character {ch!r} at offset {i}")
    return tokens


class _Parser:
    def __init__(self, tokens: list[str]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> str | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> str:
        tok = self.peek()
        if tok is None:
            raise FormulaError("unexpected end of formula")
        self.pos += 1
        return tok

    def expect(self, tok: str) -> None:
        got = self.take()
        if got != tok:
            raise FormulaError(f"expected {tok!r}, got {got!r}")

    def parse_formula(self) -> Formula:
        left = self.parse_until()
        if self.peek() == "-->":
            self.take()
            return Implies(left, self.parse_formula())
        return left

    def parse_until(self) -> Formula:
        left = self.parse_or()
        tok = self.peek()
        if tok in _INFIX_OPS:
            self.take()
            return _INFIX_OPS[tok](left, self.parse_until())
        return left

    def parse_or(self) -> Formula:
        left = self.parse_and()
        while self.peek() == "||":
            self.take()
            left = Or(left, self.parse_and())
        return left

    def parse_and(self) -> Formula:
        left = self.parse_unary()
        while self.peek() == "&&":
            self.take()
            left = And(left, self.parse_unary())
        return left

    def parse_unary(self) -> Formula:
        tok = self.peek()
        if tok == "!":
            self.take()
            return Not(self.parse_unary())
        if tok in _PREFIX_OPS:
            self.take()
            return _PREFIX_OPS[tok](self.parse_unary())
        if tok == "G":
            self.take()
            return Globally(self.parse_unary())
        if tok == "F":
            self.take()
            return Eventually(self.parse_unary())
        return self.parse_atom()

    def parse_atom(self) -> Formula:
        tok = self.take()
        if tok == "(":
            inner = self.parse_formula()
            self.expect(")")
            return inner
        if tok == "true":
            return TrueConst()
        if tok == "false":
            return FalseConst()
        if tok == "#":
            return Atom(TERM)
        if tok in _RESERVED or tok in ("(", ")", "!", "&&", "||", "-->"):
            raise FormulaError(f"unexpected token {tok!r}")
        return Atom(tok)


def parse_formula(text: str) -> Formula:
    """Parse the surface syntax."""
    parser = _Parser(_tokenize(text))
    formula = parser.parse_formula()
    if parser.peek() is not None:
        raise FormulaError(f"trailing input at token {parser.peek()!r}")
    return formula


def _children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(
        f,
        (Not, Next, WNext, ChainNext, WChainNext, HNext, WHNext, Globally, Eventually),
    ):
        return (f.arg,)
    if isinstance(f, (And, Or, Implies, Until, Release, HUntil, HRelease)):
        return (f.left, f.right)
    return ()


_UNARY_NAMES = {
    Next: "N",
    WNext: "WN",
    ChainNext: "CN",
    WChainNext: "WCN",
    HNext: "HN",
    WHNext: "WHN",
}

_BINARY_NAMES = {
    Until: "U",
    Release: "R",
    HUntil: "HU",
    HRelease: "HR",
}

# precedence levels, loosest first
_LEVEL_IMPLIES, _LEVEL_UNTIL, _LEVEL_OR, _LEVEL_AND, _LEVEL_UNARY = range(5)


def _level(f: Formula) -> int:
    if isinstance(f, Implies):
        return _LEVEL_IMPLIES
    if isinstance(f, (Until, Release, HUntil, HRelease)):
        return _LEVEL_UNTIL
    if isinstance(f, Or):
        return _LEVEL_OR
    if isinstance(f, And):
        return _LEVEL_AND
    return _LEVEL_UNARY


def pretty(f: Formula) -> str:
    """Render in the surface syntax with minimal parentheses."""

    def wrap(sub: Formula, minimum: int) -> str:
        text = pretty(sub)
        return f"({text})" if _level(sub) < minimum else text

    if isinstance(f, Atom):
        return f.name
    if isinstance(f, TrueConst):
        return "true"
    if isinstance(f, FalseConst):
        return "false"
    if isinstance(f, Zeta):
        return f"__zeta{f.dir.value}"
    if isinstance(f, Not):
        return "! " + wrap(f.arg, _LEVEL_UNARY)
    if isinstance(f, Globally):
        return "G " + wrap(f.arg, _LEVEL_UNARY)
    if isinstance(f, Eventually):
        return "F " + wrap(f.arg, _LEVEL_UNARY)
    if type(f) in _UNARY_NAMES:
        name = _UNARY_NAMES[type(f)] + f.dir.value  # type: ignore[attr-defined]
        return f"{name} " + wrap(f.arg, _LEVEL_UNARY)  # type: ignore[attr-defined]
    if type(f) in _BINARY_NAMES:
        name = _BINARY_NAMES[type(f)] + f.dir.value  # type: ignore[attr-defined]
        lhs = wrap(f.left, _LEVEL_OR)  # type: ignore[attr-defined]
        rhs = wrap(f.right, _LEVEL_UNTIL)  # type: ignore[attr-defined]
        return f"{lhs} {name} {rhs}"
    if isinstance(f, And):
        return f"{wrap(f.left, _LEVEL_AND)} && {wrap(f.right, _LEVEL_UNARY)}"
    if isinstance(f, Or):
        return f"{wrap(f.left, _LEVEL_OR)} || {wrap(f.right, _LEVEL_AND)}"
    if isinstance(f, Implies):
        return f"{wrap(f.left, _LEVEL_UNTIL)} --> {wrap(f.right, _LEVEL_IMPLIES)}"
    raise FormulaError(f"cannot render {f!r}")


def nnf(f: Formula) -> Formula:
    """Negation normal form via the strong/weak and until/release dualities."""
    return _nnf(f, negate=False)


def _nnf(f: Formula, negate: bool) -> Formula:
    if isinstance(f, Globally):
        inner = _nnf(f.arg, negate)
        return Eventually(inner) if negate else Globally(inner)
    if isinstance(f, Eventually):
        inner = _nnf(f.arg, negate)
        return Globally(inner) if negate else Eventually(inner)
    if isinstance(f, Not):
        return _nnf(f.arg, not negate)
    if isinstance(f, TrueConst):
        return FalseConst() if negate else f
    if isinstance(f, FalseConst):
        return TrueConst() if negate else f
    if isinstance(f, (Atom, Zeta)):
        return Not(f) if negate else f
    if isinstance(f, And):
        l, r = _nnf(f.left, negate), _nnf(f.right, negate)
        return Or(l, r) if negate else And(l, r)
    if isinstance(f, Or):
        l, r = _nnf(f.left, negate), _nnf(f.right, negate)
        return And(l, r) if negate else Or(l, r)
    if isinstance(f, Implies):
        if negate:
            return And(_nnf(f.left, False), _nnf(f.right, True))
        return Or(_nnf(f.left, True), _nnf(f.right, False))
    if isinstance(f, Next):
        inner = _nnf(f.arg, negate)
        return WNext(f.dir, inner) if negate else Next(f.dir, inner)
    if isinstance(f, WNext):
        inner = _nnf(f.arg, negate)
        return Next(f.dir, inner) if negate else WNext(f.dir, inner)
    if isinstance(f, ChainNext):
        inner = _nnf(f.arg, negate)
        return WChainNext(f.dir, inner) if negate else ChainNext(f.dir, inner)
    if isinstance(f, WChainNext):
        inner = _nnf(f.arg, negate)
        return ChainNext(f.dir, inner) if negate else WChainNext(f.dir, inner)
    if isinstance(f, HNext):
        inner = _nnf(f.arg, negate)
        return WHNext(f.dir, inner) if negate else HNext(f.dir, inner)
    if isinstance(f, WHNext):
        inner = _nnf(f.arg, negate)
        return HNext(f.dir, inner) if negate else WHNext(f.dir, inner)
    if isinstance(f, Until):
        l, r = _nnf(f.left, negate), _nnf(f.right, negate)
        return Release(f.dir, l, r) if negate else Until(f.dir, l, r)
    if isinstance(f, Release):
        l, r = _nnf(f.left, negate), _nnf(f.right, negate)
        return Until(f.dir, l, r) if negate else Release(f.dir, l, r)
    if isinstance(f, HUntil):
        l, r = _nnf(f.left, negate), _nnf(f.right, negate)
        return HRelease(f.dir, l, r) if negate else HUntil(f.dir, l, r)
    if isinstance(f, HRelease):
        l, r = _nnf(f.left, negate), _nnf(f.right, negate)
        return HUntil(f.dir, l, r) if negate else HRelease(f.dir, l, r)
    raise FormulaError(f"cannot normalize {f!r}")


def is_nnf(f: Formula) -> bool:
    if isinstance(f, Not):
        return isinstance(f.arg, (Atom, Zeta))
    if isinstance(f, Globally):
        return is_nnf(f.arg)
    if isinstance(f, Implies):
        return False
    return all(is_nnf(c) for c in _children(f))


def xnf(f: Formula) -> Formula:
    """Next normal form: rewrite until/release families into local choices.

    The result is a boolean combination of literals and of next-style
    operators treated as atomic obligations; hierarchical until/release
    also surface the family-membership markers.
    """
    if isinstance(f, (Atom, TrueConst, FalseConst, Not, Zeta)):
        return f
    if isinstance(f, And):
        return And(xnf(f.left), xnf(f.right))
    if isinstance(f, Or):
        return Or(xnf(f.left), xnf(f.right))
    if isinstance(f, (Next, WNext, ChainNext, WChainNext, HNext, WHNext)):
        return f
    if isinstance(f, Until):
        keep = And(xnf(f.left), Or(Next(f.dir, f), ChainNext(f.dir, f)))
        return Or(xnf(f.right), keep)
    if isinstance(f, Release):
        keep = Or(xnf(f.left), And(WNext(f.dir, f), WChainNext(f.dir, f)))
        return And(xnf(f.right), keep)
    if isinstance(f, HUntil):
        now = And(xnf(f.right), Zeta(f.dir))
        keep = And(xnf(f.left), HNext(f.dir, f))
        return Or(now, keep)
    if isinstance(f, HRelease):
        now = Or(Not(Zeta(f.dir)), xnf(f.right))
        keep = Or(xnf(f.left), WHNext(f.dir, f))
        return And(now, keep)
    if isinstance(f, Globally):
        keep = And(WNext(Dir.DOWN, f), WNext(Dir.UP, f))
        return Or(Atom(TERM), And(xnf(f.arg), keep))
    if isinstance(f, Eventually):
        move = Or(Next(Dir.DOWN, f), Next(Dir.UP, f))
        return And(Not(Atom(TERM)), Or(xnf(f.arg), move))
    raise FormulaError(f"xnf is undefined for {f!r} (normalize first)")


def subformulas(f: Formula) -> Iterator[Formula]:
    yield f
    for child in _children(f):
        yield from subformulas(child)


def atoms_of(f: Formula) -> frozenset[str]:
    return frozenset(s.name for s in subformulas(f) if isinstance(s, Atom))


@dataclass(frozen=True)
class OpWord:
    """A finite word: structural symbols with proposition labels.

    Positions run from 0 to ``n = len(body) + 1``; positions 0 and n carry
    the delimiter, body positions carry one structural symbol plus any
    atomic propositions.
    """

    matrix: OpMatrix
    body: tuple[tuple[str, frozenset[str]], ...]

    @classmethod
    def make(
        cls, matrix: OpMatrix, entries: Iterable[tuple[str, Iterable[str]] | str]
    ) -> "OpWord":
        body = []
        for entry in entries:
            if isinstance(entry, str):
                body.append((entry, frozenset()))
            else:
                sym, props = entry
                body.append((sym, frozenset(props)))
        return cls(matrix, tuple(body))

    @property
    def last(self) -> int:
        """The position of the trailing delimiter."""
        return len(self.body) + 1

    def symbol(self, i: int) -> str:
        if i == 0 or i == self.last:
            return TERM
        return self.body[i - 1][0]

    def props(self, i: int) -> frozenset[str]:
        if i == 0 or i == self.last:
            return frozenset()
        return self.body[i - 1][1]

    def symbols(self) -> tuple[str, ...]:
        return tuple(sym for sym, _ in self.body)

    def prec(self, i: int, j: int) -> Prec | None:
        return self.matrix.prec(self.symbol(i), self.symbol(j))

    def __str__(self) -> str:
        return render_word(self)


def parse_word_literal(matrix: OpMatrix, text: str) -> OpWord:
    """Parse ``call han{p} call exc`` style word literals."""
    entries: list[tuple[str, frozenset[str]]] = []
    for token in text.split():
        if "{" in token:
            if not token.endswith("}"):
                raise OpalError(f"malformed word token {token!r}")
            sym, raw = token[:-1].split("{", 1)
            props = frozenset(p for p in raw.split(",") if p)
        else:
            sym, props = token, frozenset()
        if sym not in matrix.symbols:
            raise OpalError(f"symbol {sym!r} outside the alphabet")
        entries.append((sym, props))
    return OpWord(matrix, tuple(entries))


def render_word(word: OpWord) -> str:
    parts = []
    for sym, props in word.body:
        if props:
            parts.append(sym + "{" + ",".join(sorted(props)) + "}")
        else:
            parts.append(sym)
    return " ".join(parts)


_DIR_STEP = {
    Dir.DOWN: (Prec.YIELDS, Prec.EQUALS),
    Dir.UP: (Prec.TAKES, Prec.EQUALS),
}


class Evaluator:
    """Direct evaluation of formulas on one word, with memoization."""

    def __init__(self, word: OpWord):
        self.word = word
        result = parse_word(word.matrix, word.symbols())
        self.chains: frozenset[tuple[int, int]] = result.chains
        self._from_left: dict[int, list[int]] = {}
        self._from_right: dict[int, list[int]] = {}
        for i, j in sorted(self.chains):
            self._from_left.setdefault(i, []).append(j)
            self._from_right.setdefault(j, []).append(i)
        for js in self._from_left.values():
            js.sort()
        for is_ in self._from_right.values():
            is_.sort()
        self._memo: dict[tuple[Formula, int], bool] = {}

    # -- path structure ------------------------------------------------

    def summary_path(self, i: int, j: int, direction: Dir) -> tuple[int, ...] | None:
        """The summary path from i to j, or None when it does not exist.

        From each position, jump to the farthest chain target not beyond j
        whose context relation is compatible with the direction; otherwise
        move to the adjacent position under the same compatibility demand.
        """
        allowed = _DIR_STEP[direction]
        path = [i]
        p = i
        while p < j:
            jumps = [
                h
                for h in self._from_left.get(p, ())
                if p < h <= j and self.word.prec(p, h) in allowed
            ]
            if jumps:
                p = max(jumps)
            elif self.word.prec(p, p + 1) in allowed:
                p += 1
            else:
                return None
            path.append(p)
        return tuple(path)

    def hier_context(self, i: int, direction: Dir) -> int | None:
        """The context position whose hierarchical family contains ``i``."""
        if direction is Dir.UP:
            for h in self._from_right.get(i, ()):
                if self.word.prec(h, i) is Prec.YIELDS:
                    return h
            return None
        for h in self._from_left.get(i, ()):
            if self.word.prec(i, h) is Prec.TAKES:
                return h
        return None

    def hier_family(self, h: int, direction: Dir) -> list[int]:
        """All positions sharing the context ``h``, in word order."""
        if direction is Dir.UP:
            return [
                k
                for k in self._from_left.get(h, ())
                if self.word.prec(h, k) is Prec.YIELDS
            ]
        return [
            k
            for k in self._from_right.get(h, ())
            if self.word.prec(k, h) is Prec.TAKES
        ]

    def hier_path(self, i: int, j: int, direction: Dir) -> tuple[int, ...] | None:
        """The hierarchical path between two same-family positions."""
        h = self.hier_context(i, direction)
        if h is None or i > j:
            return None
        family = self.hier_family(h, direction)
        if j not in family:
            return None
        return tuple(k for k in family if i <= k <= j)

    def _hier_successor(self, i: int, direction: Dir) -> int | None:
        h = self.hier_context(i, direction)
        if h is None:
            return None
        later = [k for k in self.hier_family(h, direction) if k > i]
        return min(later) if later else None

    def is_hier_member(self, i: int, direction: Dir) -> bool:
        return self.hier_context(i, direction) is not None

    # -- evaluation ----------------------------------------------------

    def eval(self, f: Formula, i: int) -> bool:
        key = (f, i)
        cached = self._memo.get(key)
        if cached is not None:
            return cached
        value = self._eval(f, i)
        self._memo[key] = value
        return value

    def _eval(self, f: Formula, i: int) -> bool:
        word = self.word
        n = word.last
        if not 0 <= i <= n:
            raise IndexError(f"position {i} outside the word")
        if isinstance(f, Atom):
            if f.name == TERM:
                return i == 0 or i == n
            return f.name == word.symbol(i) or f.name in word.props(i)
        if isinstance(f, TrueConst):
            return True
        if isinstance(f, FalseConst):
            return False
        if isinstance(f, Zeta):
            return self.is_hier_member(i, f.dir)
        if isinstance(f, Not):
            return not self.eval(f.arg, i)
        if isinstance(f, And):
            return self.eval(f.left, i) and self.eval(f.right, i)
        if isinstance(f, Or):
            return self.eval(f.left, i) or self.eval(f.right, i)
        if isinstance(f, Implies):
            return not self.eval(f.left, i) or self.eval(f.right, i)
        if isinstance(f, Next):
            return (
                i < n
                and word.prec(i, i + 1) in _DIR_STEP[f.dir]
                and self.eval(f.arg, i + 1)
            )
        if isinstance(f, WNext):
            if i < n and word.prec(i, i + 1) in _DIR_STEP[f.dir]:
                return self.eval(f.arg, i + 1)
            return True
        if isinstance(f, ChainNext):
            return any(
                word.prec(i, j) in _DIR_STEP[f.dir] and self.eval(f.arg, j)
                for j in self._from_left.get(i, ())
            )
        if isinstance(f, WChainNext):
            return all(
                self.eval(f.arg, j)
                for j in self._from_left.get(i, ())
                if word.prec(i, j) in _DIR_STEP[f.dir]
            )
        if isinstance(f, Until):
            for j in range(i, n + 1):
                path = self.summary_path(i, j, f.dir)
                if path is None:
                    continue
                if self.eval(f.right, j) and all(
                    self.eval(f.left, k) for k in path[:-1]
                ):
                    return True
            return False
        if isinstance(f, Release):
            for j in range(i, n + 1):
                path = self.summary_path(i, j, f.dir)
                if path is None:
                    continue
                if self.eval(f.right, j):
                    continue
                if not any(self.eval(f.left, k) for k in path[:-1]):
                    return False
            return True
        if isinstance(f, HNext):
            j = self._hier_successor(i, f.dir)
            return j is not None and self.eval(f.arg, j)
        if isinstance(f, WHNext):
            j = self._hier_successor(i, f.dir)
            return j is None or self.eval(f.arg, j)
        if isinstance(f, HUntil):
            h = self.hier_context(i, f.dir)
            if h is None:
                return False
            family = [k for k in self.hier_family(h, f.dir) if k >= i]
            for idx, j in enumerate(family):
                if self.eval(f.right, j) and all(
                    self.eval(f.left, k) for k in family[:idx]
                ):
                    return True
            return False
        if isinstance(f, HRelease):
            h = self.hier_context(i, f.dir)
            if h is None:
                return True
            family = [k for k in self.hier_family(h, f.dir) if k >= i]
            for idx, j in enumerate(family):
                if self.eval(f.right, j):
                    continue
                if not any(self.eval(f.left, k) for k in family[:idx]):
                    return False
            return True
        if isinstance(f, Globally):
            return all(self.eval(f.arg, j) for j in range(max(i, 1), n))
        if isinstance(f, Eventually):
            return any(self.eval(f.arg, j) for j in range(max(i, 1), n))
        raise FormulaError(f"cannot evaluate {f!r}")


def satisfies(word: OpWord, f: Formula) -> bool:
    """Whether the word models the formula at the first position."""
    return Evaluator(word).eval(f, 1)


def label_subsets(aps: Sequence[str]) -> list[frozenset[str]]:
    subsets: list[frozenset[str]] = [frozenset()]
    for p in aps:
        subsets.extend(s | {p} for s in list(subsets))
    return subsets


def enumerate_opwords(
    matrix: OpMatrix,
    aps: Sequence[str],
    max_len: int,
    include_empty: bool = False,
) -> Iterator[OpWord]:
    """All labeled words up to a length bound, shortest first.

    The default skips the empty word, matching the convention that word
    enumeration counts the four one-symbol words first on the standard
    procedural alphabet.
    """
    subsets = label_subsets(aps)
    for body in iter_bodies(matrix.symbols, max_len, include_empty):
        for labels in _labelings(len(body), subsets):
            yield OpWord(matrix, tuple(zip(body, labels)))


def _labelings(
    length: int, subsets: list[frozenset[str]]
) -> Iterator[tuple[frozenset[str], ...]]:
    if length == 0:
        yield ()
        return
    for rest in _labelings(length - 1, subsets):
        for s in subsets:
            yield rest + (s,)


def is_satisfiable_bruteforce(
    f: Formula,
    matrix: OpMatrix,
    aps: Sequence[str],
    max_len: int,
) -> OpWord | None:
    """Search all words up to the bound for a model; None when none exists.

    The empty word is included: a formula can be modeled by the bare
    delimiter pair.
    """
    for word in enumerate_opwords(matrix, aps, max_len, include_empty=True):
        if satisfies(word, f):
            return word
    return None
