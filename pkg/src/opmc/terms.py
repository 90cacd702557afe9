"""S-expression terms: build, render, and read SMT-LIB 2 text.

Terms are plain data: a string is a symbol or literal, a tuple is an
application.  Rendering is deterministic, so identical term trees always
produce identical bytes; the reader is the exact inverse on the rendered
fragment of the language and is also used to take apart solver replies.
"""

from __future__ import annotations

from typing import Iterator, Sequence, Union

SExpr = Union[str, tuple]


class SExprError(ValueError):
    """Raised for malformed s-expression text."""


def app(head: str, *args: SExpr) -> SExpr:
    """An application node; with no arguments it stays a bare symbol."""
    if not args:
        return head
    return (head, *args)


def conj(terms: Sequence[SExpr]) -> SExpr:
    """An and-node, flattened for the trivial arities."""
    terms = [t for t in terms if t != "true"]
    if not terms:
        return "true"
    if len(terms) == 1:
        return terms[0]
    return ("and", *terms)


def disj(terms: Sequence[SExpr]) -> SExpr:
    """An or-node, flattened for the trivial arities."""
    terms = [t for t in terms if t != "false"]
    if not terms:
        return "false"
    if len(terms) == 1:
        return terms[0]
    return ("or", *terms)


def neg(term: SExpr) -> SExpr:
    if term == "true":
        return "false"
    if term == "false":
        return "true"
    if isinstance(term, tuple) and len(term) == 2 and term[0] == "not":
        return term[1]
    return ("not", term)


def implies(left: SExpr, right: SExpr) -> SExpr:
    if left == "true":
        return right
    if left == "false" or right == "true":
        return "true"
    return ("=>", left, right)


def equals(left: SExpr, right: SExpr) -> SExpr:
    return ("=", left, right)


def bv_lit(value: int, width: int) -> SExpr:
    """A bitvector literal in binary notation."""
    if value < 0 or value >= 1 << width:
        raise SExprError(f"value {value} does not fit in {width} bits")
    return "#b" + format(value, f"0{width}b")


def bv_sort(width: int) -> SExpr:
    return ("_", "BitVec", str(width))


def render(term: SExpr) -> str:
    """Render one term to its canonical single-line text."""
    if isinstance(term, str):
        if not term:
            raise SExprError("empty symbol")
        return term
    if isinstance(term, tuple):
        # an empty tuple is the empty list, e.g. a nullary parameter list
        return "(" + " ".join(render(t) for t in term) + ")"
    raise SExprError(f"not a term: {term!r}")


def parse_all(text: str) -> list[SExpr]:
    """Read every term in the text; comments run to the end of line."""
    tokens = _tokenize(text)
    out: list[SExpr] = []
    pos = 0
    while pos < len(tokens):
        term, pos = _parse_one(tokens, pos)
        out.append(term)
    return out


def parse_one(text: str) -> SExpr:
    terms = parse_all(text)
    if len(terms) != 1:
        raise SExprError(f"expected one term, found {len(terms)}")
    return terms[0]


def _tokenize(text: str) -> list[str]:
    tokens: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch in "()":
            tokens.append(ch)
            i += 1
        elif ch == "|":
            j = text.find("|", i + 1)
            if j < 0:
                raise SExprError("unterminated quoted symbol")
            tokens.append(text[i : j + 1])
            i = j + 1
        elif ch == '"':
            j = i + 1
            while j < n:
                if text[j] == '"':
                    if j + 1 < n and text[j + 1] == '"':
                        j += 2
                        continue
                    break
                j += 1
            if j >= n:
                raise SExprError("unterminated string literal")
            tokens.append(text[i : j + 1])
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "();|\"":
                j += 1
            tokens.append(text[i:j])
            i = j
    return tokens


def _parse_one(tokens: list[str], pos: int) -> tuple[SExpr, int]:
    if pos >= len(tokens):
        raise SExprError("unexpected end of input")
    tok = tokens[pos]
    if tok == "(":
        items: list[SExpr] = []
        pos += 1
        while pos < len(tokens) and tokens[pos] != ")":
            term, pos = _parse_one(tokens, pos)
            items.append(term)
        if pos >= len(tokens):
            raise SExprError("unbalanced parenthesis")
        return tuple(items), pos + 1
    if tok == ")":
        raise SExprError("unexpected closing parenthesis")
    return tok, pos + 1


def iter_symbols(term: SExpr) -> Iterator[str]:
    """All symbol leaves, left to right."""
    if isinstance(term, str):
        yield term
        return
    for item in term:
        yield from iter_symbols(item)


def parse_bv(term: SExpr) -> tuple[int, int] | None:
    """Read a bitvector literal as ``(value, width)`` in any notation.

    Solvers print ``#b…``, ``#x…``, or ``(_ bvN width)`` depending on the
    width and their own taste; all three mean the same constant.
    """
    if isinstance(term, str):
        if term.startswith("#b"):
            return int(term[2:], 2), len(term) - 2
        if term.startswith("#x"):
            return int(term[2:], 16), 4 * (len(term) - 2)
        return None
    if (
        len(term) == 3
        and term[0] == "_"
        and isinstance(term[1], str)
        and term[1].startswith("bv")
        and isinstance(term[2], str)
    ):
        return int(term[1][2:]), int(term[2])
    return None
