"""Procedural program models: a small imperative language and its
translation to a symbol-emitting automaton suitable for the bounded
encoding.

Programs consist of global variables, observation atoms, and functions
built from assignments, conditionals, loops, calls (with value-result
parameters), try/catch blocks, and throw.  A program defines a set of
words over the call/ret/han/exc alphabet: each call and return of a
function emits a position labeled with the function's name and tags, a
try emits a handler position, and a throw emits an exception position
that unwinds to the innermost active handler.

The translation keeps only stable control locations (call sites, try
sites, function exits, the unwinding state); straight-line assignments
and branch guards between two emitted positions fold into the earlier
position's transition, so values change between positions and labels
reflect the state on entering a position.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

from .op_alphabet import OpMatrix, TERM
from .smt_encoding import AssertGroups, EncodingError, FormulaEncoding
from .terms import SExpr, bv_lit, bv_sort, conj, disj, equals, implies, neg, render


class MiniProcError(ValueError):
    """Raised for syntax, typing, or translation errors in a program."""


# ---------------------------------------------------------------------------
# abstract syntax


@dataclass
class Ty:
    width: int
    signed: bool

    def __str__(self) -> str:
        return f"{'s' if self.signed else 'u'}{self.width}"


BOOL = "bool"


@dataclass
class Expr:
    ty: object = field(default=None, init=False, compare=False)


@dataclass
class ELit(Expr):
    value: int


@dataclass
class EBoolLit(Expr):
    value: bool


@dataclass
class EVar(Expr):
    name: str
    resolved: str = field(default="", compare=False)


@dataclass
class EIndex(Expr):
    name: str
    index: "Expr"
    resolved: str = field(default="", compare=False)


@dataclass
class EUn(Expr):
    op: str
    arg: "Expr"


@dataclass
class EBin(Expr):
    op: str
    left: "Expr"
    right: "Expr"


@dataclass
class SAssign:
    target: str
    index: Expr | None
    value: Expr | None  # None encodes a nondeterministic assignment
    line: int


@dataclass
class SIf:
    cond: Expr | None  # None encodes a nondeterministic branch
    then: list
    other: list
    line: int


@dataclass
class SWhile:
    cond: Expr | None
    body: list
    line: int


@dataclass
class SCall:
    name: str
    args: list  # Expr or ByRef
    line: int


@dataclass
class ByRef:
    name: str
    resolved: str = field(default="", compare=False)


@dataclass
class STry:
    body: list
    handler: list
    line: int


@dataclass
class SThrow:
    line: int


@dataclass
class Param:
    name: str
    ty: Ty
    byref: bool


@dataclass
class FuncDef:
    name: str
    params: list[Param]
    tags: tuple[str, ...]
    body: list
    line: int


@dataclass
class GlobalVar:
    name: str
    ty: Ty
    elems: int | None  # None for scalars
    line: int
    init: int = 0


@dataclass
class ObsDecl:
    name: str
    expr: Expr
    line: int


@dataclass
class Program:
    globals: list[GlobalVar]
    obs: list[ObsDecl]
    functions: list[FuncDef]

    def function(self, name: str) -> FuncDef:
        for f in self.functions:
            if f.name == name:
                return f
        raise MiniProcError(f"no function named {name}")


# ---------------------------------------------------------------------------
# tokenizer / parser

_KEYWORDS = {
    "if", "else", "while", "try", "catch", "throw", "obs", "tags",
    "true", "false",
}
_PUNCT = [
    "&&", "||", "==", "!=", "<=", ">=",
    "(", ")", "{", "}", "[", "]", ";", ",", "=", "<", ">", "+", "-",
    "*", "!", "&",
]


@dataclass
class _Tok:
    kind: str  # ident / int / punct / type
    text: str
    line: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, line = 0, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            continue
        if text.startswith("//", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            toks.append(_Tok("int", text[i:j], line))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            toks.append(_Tok("ident", word, line))
            i = j
            continue
        for p in _PUNCT:
            if text.startswith(p, i):
                toks.append(_Tok("punct", p, line))
                i += len(p)
                break
        else:
            raise MiniProcError(f"line {line}: unexpected character {ch!r}")
    return toks


def _parse_ty(word: str) -> Ty | None:
    if len(word) >= 2 and word[0] in "us" and word[1:].isdigit():
        width = int(word[1:])
        if not 1 <= width <= 64:
            raise MiniProcError(f"unsupported width in type {word}")
        return Ty(width, word[0] == "s")
    return None


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.pos = 0

    def _peek(self, ahead: int = 0) -> _Tok | None:
        i = self.pos + ahead
        return self.toks[i] if i < len(self.toks) else None

    def _next(self) -> _Tok:
        tok = self._peek()
        if tok is None:
            raise MiniProcError("unexpected end of program")
        self.pos += 1
        return tok

    def _expect(self, text: str) -> _Tok:
        tok = self._next()
        if tok.text != text:
            raise MiniProcError(
                f"line {tok.line}: expected {text!r}, found {tok.text!r}"
            )
        return tok

    def _at(self, text: str) -> bool:
        tok = self._peek()
        return tok is not None and tok.text == text

    def parse_program(self) -> Program:
        globals_: list[GlobalVar] = []
        obs: list[ObsDecl] = []
        functions: list[FuncDef] = []
        while self._peek() is not None:
            tok = self._peek()
            if tok.text == "obs":
                self._next()
                name = self._ident()
                self._expect("=")
                expr = self.parse_expr()
                self._expect(";")
                obs.append(ObsDecl(name.text, expr, name.line))
                continue
            ty = _parse_ty(tok.text)
            if ty is not None:
                self._next()
                elems = None
                if self._at("["):
                    self._next()
                    count = self._next()
                    if count.kind != "int":
                        raise MiniProcError(
                            f"line {count.line}: array length must be a literal"
                        )
                    elems = int(count.text)
                    if elems < 1:
                        raise MiniProcError(
                            f"line {count.line}: array length must be positive"
                        )
                    self._expect("]")
                name = self._ident()
                init = 0
                if self._at("="):
                    if elems is not None:
                        raise MiniProcError(
                            f"line {name.line}: arrays cannot take initializers"
                        )
                    self._next()
                    minus = False
                    if self._at("-"):
                        self._next()
                        minus = True
                    lit = self._next()
                    if lit.kind != "int":
                        raise MiniProcError(
                            f"line {lit.line}: initializers must be literals"
                        )
                    init = -int(lit.text) if minus else int(lit.text)
                    lo = -(1 << (ty.width - 1)) if ty.signed else 0
                    hi = (
                        (1 << (ty.width - 1)) - 1
                        if ty.signed
                        else (1 << ty.width) - 1
                    )
                    if not lo <= init <= hi:
                        raise MiniProcError(
                            f"line {lit.line}: initializer {init} does not fit {ty}"
                        )
                self._expect(";")
                globals_.append(GlobalVar(name.text, ty, elems, name.line, init))
                continue
            functions.append(self._function())
        return Program(globals_, obs, functions)

    def _ident(self) -> _Tok:
        tok = self._next()
        if tok.kind != "ident" or tok.text in _KEYWORDS or _parse_ty(tok.text):
            raise MiniProcError(f"line {tok.line}: expected a name, found {tok.text!r}")
        return tok

    def _function(self) -> FuncDef:
        name = self._ident()
        self._expect("(")
        params: list[Param] = []
        while not self._at(")"):
            if params:
                self._expect(",")
            ty_tok = self._next()
            ty = _parse_ty(ty_tok.text)
            if ty is None:
                raise MiniProcError(
                    f"line {ty_tok.line}: expected a parameter type, found {ty_tok.text!r}"
                )
            byref = False
            if self._at("&"):
                self._next()
                byref = True
            pname = self._ident()
            params.append(Param(pname.text, ty, byref))
        self._expect(")")
        tags: tuple[str, ...] = ()
        if self._at("tags"):
            self._next()
            self._expect("(")
            names = []
            while not self._at(")"):
                if names:
                    self._expect(",")
                names.append(self._ident().text)
            self._expect(")")
            tags = tuple(names)
        body = self._block()
        return FuncDef(name.text, params, tags, body, name.line)

    def _block(self) -> list:
        self._expect("{")
        stmts = []
        while not self._at("}"):
            stmts.append(self._stmt())
        self._expect("}")
        return stmts

    def _stmt(self):
        tok = self._peek()
        if tok is None:
            raise MiniProcError("unexpected end of program")
        if tok.text == "if":
            self._next()
            self._expect("(")
            cond = None if self._at("*") else self.parse_expr()
            if cond is None:
                self._next()
            self._expect(")")
            then = self._block()
            other = []
            if self._at("else"):
                self._next()
                other = self._block()
            return SIf(cond, then, other, tok.line)
        if tok.text == "while":
            self._next()
            self._expect("(")
            cond = None if self._at("*") else self.parse_expr()
            if cond is None:
                self._next()
            self._expect(")")
            body = self._block()
            return SWhile(cond, body, tok.line)
        if tok.text == "try":
            self._next()
            body = self._block()
            self._expect("catch")
            handler = self._block()
            return STry(body, handler, tok.line)
        if tok.text == "throw":
            self._next()
            self._expect(";")
            return SThrow(tok.line)
        name = self._ident()
        if self._at("("):
            self._next()
            args: list = []
            while not self._at(")"):
                if args:
                    self._expect(",")
                if self._at("&"):
                    self._next()
                    args.append(ByRef(self._ident().text))
                else:
                    args.append(self.parse_expr())
            self._expect(")")
            self._expect(";")
            return SCall(name.text, args, name.line)
        index = None
        if self._at("["):
            self._next()
            index = self.parse_expr()
            self._expect("]")
        self._expect("=")
        if self._at("*"):
            self._next()
            self._expect(";")
            return SAssign(name.text, index, None, name.line)
        value = self.parse_expr()
        self._expect(";")
        return SAssign(name.text, index, value, name.line)

    # expressions, loosest to tightest binding

    def parse_expr(self) -> Expr:
        return self._or()

    def _or(self) -> Expr:
        left = self._and()
        while self._at("||"):
            self._next()
            left = EBin("||", left, self._and())
        return left

    def _and(self) -> Expr:
        left = self._cmp()
        while self._at("&&"):
            self._next()
            left = EBin("&&", left, self._cmp())
        return left

    def _cmp(self) -> Expr:
        left = self._sum()
        tok = self._peek()
        if tok is not None and tok.text in ("==", "!=", "<", "<=", ">", ">="):
            self._next()
            return EBin(tok.text, left, self._sum())
        return left

    def _sum(self) -> Expr:
        left = self._term()
        while True:
            tok = self._peek()
            if tok is not None and tok.text in ("+", "-"):
                self._next()
                left = EBin(tok.text, left, self._term())
            else:
                return left

    def _term(self) -> Expr:
        left = self._unary()
        while self._at("*"):
            self._next()
            left = EBin("*", left, self._unary())
        return left

    def _unary(self) -> Expr:
        if self._at("-"):
            self._next()
            return EUn("-", self._unary())
        if self._at("!"):
            self._next()
            return EUn("!", self._unary())
        return self._atom()

    def _atom(self) -> Expr:
        tok = self._next()
        if tok.text == "(":
            inner = self.parse_expr()
            self._expect(")")
            return inner
        if tok.kind == "int":
            return ELit(int(tok.text))
        if tok.text in ("true", "false"):
            return EBoolLit(tok.text == "true")
        if tok.kind == "ident" and tok.text not in _KEYWORDS:
            if self._at("["):
                self._next()
                index = self.parse_expr()
                self._expect("]")
                return EIndex(tok.text, index)
            return EVar(tok.text)
        raise MiniProcError(f"line {tok.line}: unexpected token {tok.text!r}")


def parse_miniproc(text: str) -> Program:
    program = _Parser(text).parse_program()
    _check_program(program)
    return program


# ---------------------------------------------------------------------------
# static checks and type annotation


class _Scope:
    def __init__(self, program: Program, func: FuncDef | None):
        self.program = program
        self.func = func
        self.globals = {g.name: g for g in program.globals}
        self.locals: dict[str, Param] = {}
        if func is not None:
            self.locals = {p.name: p for p in func.params}

    def resolve(self, name: str, line: int) -> tuple[str, Ty, int | None]:
        """Qualified name, type, and element count of a variable."""
        if self.func is not None and name in self.locals:
            p = self.locals[name]
            return f"{self.func.name}.{name}", p.ty, None
        if name in self.globals:
            g = self.globals[name]
            return name, g.ty, g.elems
        raise MiniProcError(f"line {line}: unknown variable {name}")


def _check_expr(e: Expr, scope: _Scope, expect, line: int):
    """Annotate ``e.ty`` bottom-up; literals adopt the expected type."""
    if isinstance(e, ELit):
        if not isinstance(expect, Ty):
            raise MiniProcError(f"line {line}: numeric literal used without a typed context")
        lo = -(1 << (expect.width - 1)) if expect.signed else 0
        hi = (1 << expect.width) - 1 if not expect.signed else (1 << (expect.width - 1)) - 1
        if not lo <= e.value <= hi:
            raise MiniProcError(f"line {line}: literal {e.value} does not fit {expect}")
        e.ty = expect
        return
    if isinstance(e, EBoolLit):
        if expect is not BOOL and expect is not None:
            raise MiniProcError(f"line {line}: boolean literal in numeric context")
        e.ty = BOOL
        return
    if isinstance(e, EVar):
        qual, ty, elems = scope.resolve(e.name, line)
        if elems is not None:
            raise MiniProcError(f"line {line}: array {e.name} used without an index")
        e.resolved = qual
        e.ty = ty
        if isinstance(expect, Ty) and (expect.width, expect.signed) != (ty.width, ty.signed):
            raise MiniProcError(f"line {line}: {e.name} has type {ty}, expected {expect}")
        if expect is BOOL:
            raise MiniProcError(f"line {line}: {e.name} used as a condition; compare it explicitly")
        return
    if isinstance(e, EIndex):
        qual, ty, elems = scope.resolve(e.name, line)
        if elems is None:
            raise MiniProcError(f"line {line}: {e.name} is not an array")
        e.resolved = qual
        _index_ty = _infer_index(e.index, scope, line)
        e.ty = ty
        if isinstance(expect, Ty) and (expect.width, expect.signed) != (ty.width, ty.signed):
            raise MiniProcError(f"line {line}: {e.name} has element type {ty}, expected {expect}")
        if expect is BOOL:
            raise MiniProcError(f"line {line}: array element used as a condition")
        return
    if isinstance(e, EUn):
        if e.op == "!":
            if expect is not BOOL and expect is not None:
                raise MiniProcError(f"line {line}: negation yields a condition, not a number")
            _check_expr(e.arg, scope, BOOL, line)
            e.ty = BOOL
            return
        # arithmetic minus
        if expect is BOOL:
            raise MiniProcError(f"line {line}: arithmetic used as a condition")
        _check_expr(e.arg, scope, expect, line)
        e.ty = e.arg.ty
        return
    if isinstance(e, EBin):
        if e.op in ("&&", "||"):
            if expect is not BOOL and expect is not None:
                raise MiniProcError(f"line {line}: {e.op} yields a condition, not a number")
            _check_expr(e.left, scope, BOOL, line)
            _check_expr(e.right, scope, BOOL, line)
            e.ty = BOOL
            return
        if e.op in ("==", "!=", "<", "<=", ">", ">="):
            if expect is not BOOL and expect is not None:
                raise MiniProcError(f"line {line}: comparison yields a condition, not a number")
            _pair_ty(e.left, e.right, scope, line)
            e.ty = BOOL
            return
        # arithmetic
        if expect is BOOL:
            raise MiniProcError(f"line {line}: arithmetic used as a condition")
        if isinstance(expect, Ty):
            _check_expr(e.left, scope, expect, line)
            _check_expr(e.right, scope, expect, line)
            e.ty = expect
        else:
            ty = _pair_ty(e.left, e.right, scope, line)
            e.ty = ty
        return
    raise MiniProcError(f"line {line}: malformed expression")


def _pair_ty(left: Expr, right: Expr, scope: _Scope, line: int) -> Ty:
    """Check two operands against each other; literals adapt."""
    if isinstance(left, (ELit,)) and isinstance(right, (ELit,)):
        raise MiniProcError(f"line {line}: cannot type a literal-only comparison")
    if isinstance(left, ELit):
        _check_expr(right, scope, None, line)
        _check_expr(left, scope, right.ty, line)
        return right.ty
    _check_expr(left, scope, None, line)
    _check_expr(right, scope, left.ty, line)
    return left.ty


def _infer_index(e: Expr, scope: _Scope, line: int) -> Ty:
    if isinstance(e, ELit):
        ty = Ty(max(1, e.value.bit_length()), False)
        e.ty = ty
        return ty
    _check_expr(e, scope, None, line)
    if e.ty is BOOL:
        raise MiniProcError(f"line {line}: condition used as an array index")
    return e.ty


def _check_program(program: Program) -> None:
    names_seen: dict[str, str] = {}

    def claim(name: str, what: str, line: int) -> None:
        if name in ("call", "ret", "han", "exc", TERM):
            raise MiniProcError(f"line {line}: the name {name} is reserved")
        if name in names_seen:
            raise MiniProcError(
                f"line {line}: {what} {name} collides with a {names_seen[name]}"
            )
        names_seen[name] = what

    for g in program.globals:
        claim(g.name, "global variable", g.line)
    for f in program.functions:
        claim(f.name, "function", f.line)
    for f in program.functions:
        for t in f.tags:
            if t in names_seen and names_seen[t] != "tag":
                raise MiniProcError(
                    f"line {f.line}: tag {t} collides with a {names_seen[t]}"
                )
            names_seen[t] = "tag"
    for o in program.obs:
        claim(o.name, "observation atom", o.line)

    if not any(f.name == "main" for f in program.functions):
        raise MiniProcError("a program must define main")
    if program.function("main").params:
        raise MiniProcError("main takes no parameters")

    glob_scope = _Scope(program, None)
    for o in program.obs:
        _check_expr(o.expr, glob_scope, BOOL, o.line)

    for f in program.functions:
        seen_params = set()
        for p in f.params:
            if p.name in seen_params:
                raise MiniProcError(f"line {f.line}: duplicate parameter {p.name}")
            seen_params.add(p.name)
        scope = _Scope(program, f)
        _check_stmts(f.body, scope, program)


def _check_stmts(stmts: Sequence, scope: _Scope, program: Program) -> None:
    for s in stmts:
        if isinstance(s, SAssign):
            qual, ty, elems = scope.resolve(s.target, s.line)
            if s.index is not None:
                if elems is None:
                    raise MiniProcError(f"line {s.line}: {s.target} is not an array")
                _infer_index(s.index, scope, s.line)
            elif elems is not None:
                raise MiniProcError(f"line {s.line}: array {s.target} needs an index")
            if s.value is not None:
                _check_expr(s.value, scope, ty, s.line)
        elif isinstance(s, SIf):
            if s.cond is not None:
                _check_expr(s.cond, scope, BOOL, s.line)
            _check_stmts(s.then, scope, program)
            _check_stmts(s.other, scope, program)
        elif isinstance(s, SWhile):
            if s.cond is not None:
                _check_expr(s.cond, scope, BOOL, s.line)
            _check_stmts(s.body, scope, program)
        elif isinstance(s, SCall):
            try:
                callee = program.function(s.name)
            except MiniProcError:
                raise MiniProcError(f"line {s.line}: call to unknown function {s.name}")
            if len(s.args) != len(callee.params):
                raise MiniProcError(
                    f"line {s.line}: {s.name} takes {len(callee.params)} arguments"
                )
            for arg, param in zip(s.args, callee.params):
                if param.byref:
                    if not isinstance(arg, ByRef):
                        raise MiniProcError(
                            f"line {s.line}: parameter {param.name} of {s.name} "
                            "needs a &variable argument"
                        )
                    qual, ty, elems = scope.resolve(arg.name, s.line)
                    if elems is not None:
                        raise MiniProcError(
                            f"line {s.line}: arrays cannot be passed by reference"
                        )
                    if (ty.width, ty.signed) != (param.ty.width, param.ty.signed):
                        raise MiniProcError(
                            f"line {s.line}: {arg.name} has type {ty}, "
                            f"parameter {param.name} needs {param.ty}"
                        )
                    arg.resolved = qual
                else:
                    if isinstance(arg, ByRef):
                        raise MiniProcError(
                            f"line {s.line}: parameter {param.name} of {s.name} "
                            "is by value; drop the &"
                        )
                    _check_expr(arg, scope, param.ty, s.line)
        elif isinstance(s, STry):
            _check_stmts(s.body, scope, program)
            _check_stmts(s.handler, scope, program)
        elif isinstance(s, SThrow):
            pass
        else:
            raise MiniProcError(f"unknown statement {s!r}")


# ---------------------------------------------------------------------------
# translation to the guarded automaton


@dataclass(frozen=True)
class GuardStep:
    expr: Expr  # boolean; None never appears here (nondet folds to true)


@dataclass(frozen=True)
class AssignStep:
    target: str  # qualified scalar or array base name
    index: Expr | None
    expr: Expr | None  # None draws a fresh nondeterministic value
    draw: int = 0  # ordinal of the nondeterministic draw along the list


@dataclass(frozen=True)
class CallStep:
    callee: str
    args: tuple  # Expr (by value) or ByRef entries, aligned with params


@dataclass(frozen=True)
class ReturnStep:
    site: "CallSiteInfo"
    copy_out: bool  # False while unwinding through an exception


@dataclass(frozen=True)
class CallSiteInfo:
    location: int
    caller: str | None  # None for the synthetic start
    callee: str
    args: tuple


@dataclass(frozen=True)
class PushTransition:
    source: int
    label: frozenset[str]
    steps: tuple
    target: int


@dataclass(frozen=True)
class ShiftTransition:
    source: int
    label: frozenset[str]
    steps: tuple
    target: int


@dataclass(frozen=True)
class PopTransition:
    source: int
    saved: int
    steps: tuple
    target: int


@dataclass
class ProgramAutomaton:
    matrix: OpMatrix
    location_names: list[str]
    initial: int
    finals: frozenset[int]
    variables: dict[str, Ty]  # qualified scalar names (array elements included)
    initials: dict[str, int]  # nonzero starting values
    locals_of: dict[str, list[str]]  # function -> qualified locals to restore
    atoms: tuple[str, ...]  # label universe beyond the structural symbols
    varap: dict[str, str]  # atom name -> qualified variable it mirrors
    obs: dict[str, Expr]
    label_pool: tuple[str, ...]  # atoms pinned by transition labels
    pushes: list[PushTransition]
    shifts: list[ShiftTransition]
    pops: list[PopTransition]
    draws: dict[str, int]  # qualified var -> number of draw slots needed
    program: Program

    def location(self, name: str) -> int:
        return self.location_names.index(name)


class _AnchorKind:
    CALL = "call"
    TRY = "try"
    EXIT = "exit"
    THROW = "throw"


@dataclass(frozen=True)
class _Anchor:
    kind: str
    key: object  # call-site ordinal / try ordinal / function name / None


@dataclass
class _FoldPath:
    steps: list
    anchor: _Anchor


class _MicroGraph:
    """Control edges between positions; only guards and assignments."""

    def __init__(self) -> None:
        self.edges: dict[int, list[tuple[Expr | None, object, object]]] = {}
        self._counter = itertools.count()

    def node(self) -> int:
        n = next(self._counter)
        self.edges[n] = []
        return n

    def eps(self, src: int, guard: Expr | None, step, dst) -> None:
        self.edges[src].append((guard, step, dst))


def lower_program(program: Program, matrix: OpMatrix) -> ProgramAutomaton:
    """Translate a checked program into the guarded automaton."""
    functions = {f.name: f for f in program.functions}

    # qualified scalar variable table (array elements are scalars here)
    variables: dict[str, Ty] = {}
    initials: dict[str, int] = {}
    for g in program.globals:
        if g.elems is None:
            variables[g.name] = g.ty
            if g.init:
                initials[g.name] = g.init
        else:
            for i in range(g.elems):
                variables[f"{g.name}[{i}]"] = g.ty
    locals_of: dict[str, list[str]] = {}
    for f in program.functions:
        locs = []
        for p in f.params:
            qual = f"{f.name}.{p.name}"
            variables[qual] = p.ty
            locs.append(qual)
        locals_of[f.name] = locs

    # stable locations
    location_names = ["init", "end", "halt", "throwing", "caught"]
    INIT, END, HALT, THROWING, CAUGHT = range(5)

    def add_location(name: str) -> int:
        location_names.append(name)
        return len(location_names) - 1

    exit_of: dict[str, int] = {}
    ret_of: dict[str, int] = {}
    for f in program.functions:
        exit_of[f.name] = add_location(f"{f.name}.exit")
        ret_of[f.name] = add_location(f"{f.name}.ret")

    call_sites: list[CallSiteInfo] = []
    try_sites: list[tuple[int, str, int, int]] = []  # (location, func, body µ, handler µ)

    graph = _MicroGraph()
    entry_micro: dict[str, int] = {}
    exit_anchor_micro: dict[str, int] = {}
    throw_micro = graph.node()  # shared: control that is about to emit exc

    micro_anchor: dict[int, _Anchor] = {throw_micro: _Anchor(_AnchorKind.THROW, None)}
    micro_of_call: dict[int, int] = {}  # call-site ordinal -> micro node
    after_of_call: dict[int, int] = {}
    micro_of_try: dict[int, int] = {}
    body_after_of_try: dict[int, tuple[int, int, int]] = {}

    def lower_stmts(func: FuncDef, stmts: Sequence, entry: int, exit_: int) -> None:
        cur = entry
        for s in stmts:
            if isinstance(s, SAssign):
                nxt = graph.node()
                qual = (
                    f"{func.name}.{s.target}"
                    if s.target in {p.name for p in func.params}
                    else s.target
                )
                graph.eps(cur, None, AssignStep(qual, s.index, s.value), nxt)
                cur = nxt
            elif isinstance(s, SIf):
                join = graph.node()
                t_in, e_in = graph.node(), graph.node()
                if s.cond is None:
                    graph.eps(cur, None, None, t_in)
                    graph.eps(cur, None, None, e_in)
                else:
                    graph.eps(cur, s.cond, None, t_in)
                    graph.eps(cur, EUn("!", s.cond), None, e_in)
                lower_stmts(func, s.then, t_in, join)
                lower_stmts(func, s.other, e_in, join)
                cur = join
            elif isinstance(s, SWhile):
                head = graph.node()
                graph.eps(cur, None, None, head)
                b_in, after = graph.node(), graph.node()
                if s.cond is None:
                    graph.eps(head, None, None, b_in)
                    graph.eps(head, None, None, after)
                else:
                    graph.eps(head, s.cond, None, b_in)
                    graph.eps(head, EUn("!", s.cond), None, after)
                lower_stmts(func, s.body, b_in, head)
                cur = after
            elif isinstance(s, SCall):
                ordinal = len(call_sites)
                loc = add_location(f"{func.name}:{ordinal}:call-{s.name}")
                site = CallSiteInfo(loc, func.name, s.name, tuple(s.args))
                call_sites.append(site)
                m = graph.node()
                micro_anchor[m] = _Anchor(_AnchorKind.CALL, ordinal)
                micro_of_call[ordinal] = m
                graph.eps(cur, None, None, m)
                after = graph.node()
                after_of_call[ordinal] = after
                cur = after
            elif isinstance(s, STry):
                ordinal = len(try_sites)
                loc = add_location(f"{func.name}:{ordinal}:try")
                m = graph.node()
                micro_anchor[m] = _Anchor(_AnchorKind.TRY, ordinal)
                micro_of_try[ordinal] = m
                graph.eps(cur, None, None, m)
                b_in, h_in, after = graph.node(), graph.node(), graph.node()
                try_sites.append((loc, func.name, b_in, h_in))
                body_after_of_try[ordinal] = (b_in, h_in, after)
                lower_stmts(func, s.body, b_in, after)
                lower_stmts(func, s.handler, h_in, after)
                cur = after
            elif isinstance(s, SThrow):
                graph.eps(cur, None, None, throw_micro)
                cur = graph.node()  # unreachable continuation
            else:
                raise MiniProcError(f"cannot lower {s!r}")
        graph.eps(cur, None, None, exit_)

    for f in program.functions:
        entry = graph.node()
        fexit = graph.node()
        micro_anchor[fexit] = _Anchor(_AnchorKind.EXIT, f.name)
        entry_micro[f.name] = entry
        exit_anchor_micro[f.name] = fexit
        lower_stmts(f, f.body, entry, fexit)

    # fold the control graph into paths between anchors
    def fold(start: int) -> list[_FoldPath]:
        paths: list[_FoldPath] = []

        def walk(node: int, steps: list, on_path: frozenset[int]) -> None:
            anchor = micro_anchor.get(node)
            if anchor is not None:
                paths.append(_FoldPath(list(steps), anchor))
                return
            if node in on_path:
                raise MiniProcError(
                    "a loop without any call, try, or throw cannot be translated"
                )
            succs = graph.edges.get(node, [])
            if not succs:
                raise MiniProcError("control falls off an unterminated path")
            for guard, step, dst in succs:
                ext = list(steps)
                if guard is not None:
                    ext.append(GuardStep(guard))
                if step is not None:
                    ext.append(step)
                walk(dst, ext, on_path | {node})

        walk(start, [], frozenset())
        return paths

    def anchor_location(anchor: _Anchor) -> int:
        if anchor.kind == _AnchorKind.CALL:
            return call_sites[anchor.key].location
        if anchor.kind == _AnchorKind.TRY:
            return try_sites[anchor.key][0]
        if anchor.kind == _AnchorKind.EXIT:
            return exit_of[anchor.key]
        return THROWING

    # labels
    fn_names = [f.name for f in program.functions]
    tag_names = sorted({t for f in program.functions for t in f.tags})
    varap = {g.name: g.name for g in program.globals if g.elems is None}
    obs = {o.name: o.expr for o in program.obs}
    label_pool = tuple(fn_names) + tuple(t for t in tag_names if t not in fn_names)
    atoms = tuple(
        dict.fromkeys(list(label_pool) + sorted(varap) + sorted(obs))
    )

    pushes: list[PushTransition] = []
    shifts: list[ShiftTransition] = []
    pops: list[PopTransition] = []

    def entry_paths(fname: str) -> list[_FoldPath]:
        return fold(entry_micro[fname])

    def finalize_draws(steps: Sequence) -> tuple:
        """Assign draw ordinals to nondeterministic assignments."""
        counts: dict[str, int] = {}
        out = []
        for st in steps:
            if isinstance(st, AssignStep) and st.expr is None:
                n = counts.get(st.target, 0)
                counts[st.target] = n + 1
                out.append(AssignStep(st.target, st.index, None, n))
            else:
                out.append(st)
        return tuple(out)

    def call_label(fname: str) -> frozenset[str]:
        f = functions[fname]
        return frozenset({"call", fname, *f.tags})

    def ret_label(fname: str) -> frozenset[str]:
        f = functions[fname]
        return frozenset({"ret", fname, *f.tags})

    # call pushes: per site, per path through the callee entry
    entry_cache = {f.name: entry_paths(f.name) for f in program.functions}
    for ordinal, site in enumerate(call_sites):
        for path in entry_cache[site.callee]:
            steps = finalize_draws(
                [CallStep(site.callee, site.args)] + path.steps
            )
            pushes.append(
                PushTransition(
                    site.location,
                    call_label(site.callee),
                    steps,
                    anchor_location(path.anchor),
                )
            )
        # continuation after a normal return, folded into the pop
        after = after_of_call[ordinal]
        for path in fold(after):
            steps = finalize_draws([ReturnStep(site, True)] + path.steps)
            pops.append(
                PopTransition(
                    ret_of[site.callee],
                    site.location,
                    steps,
                    anchor_location(path.anchor),
                )
            )
        # unwinding an open call frame during an exception
        pops.append(
            PopTransition(
                THROWING,
                site.location,
                (ReturnStep(site, False),),
                THROWING,
            )
        )

    # the synthetic start behaves like a call site for main
    start_site = CallSiteInfo(INIT, None, "main", ())
    for path in entry_cache["main"]:
        steps = finalize_draws([CallStep("main", ())] + path.steps)
        pushes.append(
            PushTransition(INIT, call_label("main"), steps, anchor_location(path.anchor))
        )
    pops.append(PopTransition(ret_of["main"], INIT, (ReturnStep(start_site, True),), END))

    # returns
    for f in program.functions:
        shifts.append(
            ShiftTransition(exit_of[f.name], ret_label(f.name), (), ret_of[f.name])
        )

    # try sites
    for ordinal, (loc, fname, b_in, h_in) in enumerate(try_sites):
        han_label = frozenset({"han", *functions[fname].tags})
        for path in fold(b_in):
            pushes.append(
                PushTransition(
                    loc, han_label, finalize_draws(path.steps), anchor_location(path.anchor)
                )
            )
        # handler dispatch happens when the caught frame is discarded
        for path in fold(h_in):
            pops.append(
                PopTransition(
                    CAUGHT, loc, finalize_draws(path.steps), anchor_location(path.anchor)
                )
            )
        # a handler frame left over on the normal path is discarded when
        # the surrounding function returns
        pops.append(PopTransition(exit_of[fname], loc, (), exit_of[fname]))

    # exceptions
    shifts.append(ShiftTransition(THROWING, frozenset({"exc"}), (), CAUGHT))
    pushes.append(PushTransition(THROWING, frozenset({"exc"}), (), HALT))
    pops.append(PopTransition(HALT, THROWING, (), HALT))
    # a throw that unwinds past the start frame escapes uncaught
    pops.append(
        PopTransition(THROWING, INIT, (ReturnStep(start_site, False),), THROWING)
    )

    draws: dict[str, int] = {}
    for tr in itertools.chain(pushes, shifts, pops):
        for st in tr.steps:
            if isinstance(st, AssignStep) and st.expr is None:
                draws[st.target] = max(draws.get(st.target, 0), st.draw + 1)

    return ProgramAutomaton(
        matrix=matrix,
        location_names=location_names,
        initial=INIT,
        finals=frozenset({END, HALT}),
        variables=variables,
        initials=initials,
        locals_of=locals_of,
        atoms=atoms,
        varap=varap,
        obs=obs,
        label_pool=label_pool,
        pushes=pushes,
        shifts=shifts,
        pops=pops,
        draws=draws,
        program=program,
    )


# ---------------------------------------------------------------------------
# stable text form of the automaton


def print_automaton(opa: ProgramAutomaton) -> str:
    lines = []
    lines.append("locations: " + " ".join(opa.location_names))
    lines.append(f"initial: {opa.location_names[opa.initial]}")
    lines.append(
        "finals: " + " ".join(sorted(opa.location_names[i] for i in opa.finals))
    )
    lines.append("atoms: " + " ".join(opa.atoms))
    for qual in sorted(opa.variables):
        suffix = ""
        if qual in opa.initials:
            suffix = f" = {opa.initials[qual]}"
        lines.append(f"var {qual}: {opa.variables[qual]}{suffix}")
    for name in sorted(opa.obs):
        lines.append(f"obs {name} = {render_expr(opa.obs[name])}")

    def step_text(steps: Sequence) -> str:
        parts = []
        for st in steps:
            if isinstance(st, GuardStep):
                parts.append(f"[{render_expr(st.expr)}]")
            elif isinstance(st, AssignStep):
                tgt = st.target if st.index is None else f"{st.target}[{render_expr(st.index)}]"
                parts.append(f"{tgt} := {'*' if st.expr is None else render_expr(st.expr)}")
            elif isinstance(st, CallStep):
                parts.append(f"enter {st.callee}")
            elif isinstance(st, ReturnStep):
                parts.append(
                    ("return to " if st.copy_out else "unwind past ")
                    + f"{opa.location_names[st.site.location]}"
                )
        return "; ".join(parts) if parts else "-"

    for tr in opa.pushes:
        lines.append(
            f"push {opa.location_names[tr.source]} "
            f"{{{' '.join(sorted(tr.label))}}} -> {opa.location_names[tr.target]}"
            f" :: {step_text(tr.steps)}"
        )
    for tr in opa.shifts:
        lines.append(
            f"shift {opa.location_names[tr.source]} "
            f"{{{' '.join(sorted(tr.label))}}} -> {opa.location_names[tr.target]}"
            f" :: {step_text(tr.steps)}"
        )
    for tr in opa.pops:
        lines.append(
            f"pop {opa.location_names[tr.source]} / {opa.location_names[tr.saved]}"
            f" -> {opa.location_names[tr.target]} :: {step_text(tr.steps)}"
        )
    return "\n".join(lines) + "\n"


def render_expr(e: Expr) -> str:
    if isinstance(e, ELit):
        return str(e.value)
    if isinstance(e, EBoolLit):
        return "true" if e.value else "false"
    if isinstance(e, EVar):
        return e.name
    if isinstance(e, EIndex):
        return f"{e.name}[{render_expr(e.index)}]"
    if isinstance(e, EUn):
        return f"{e.op}({render_expr(e.arg)})"
    if isinstance(e, EBin):
        return f"({render_expr(e.left)} {e.op} {render_expr(e.right)})"
    raise MiniProcError(f"cannot render {e!r}")


# ---------------------------------------------------------------------------
# concrete evaluation (used when replaying traces)


def eval_expr(e: Expr, values: dict[str, int]) -> int | bool:
    """Evaluate an annotated expression over concrete variable values."""
    if isinstance(e, ELit):
        return _wrap(e.value, e.ty)
    if isinstance(e, EBoolLit):
        return e.value
    if isinstance(e, EVar):
        return _wrap(values[e.resolved], e.ty)
    if isinstance(e, EIndex):
        idx = eval_expr(e.index, values)
        qual = f"{e.resolved}[{idx}]"
        if qual not in values:
            return 0
        return _wrap(values[qual], e.ty)
    if isinstance(e, EUn):
        if e.op == "!":
            return not eval_expr(e.arg, values)
        return _wrap(-eval_expr(e.arg, values), e.ty)
    if isinstance(e, EBin):
        if e.op == "&&":
            return eval_expr(e.left, values) and eval_expr(e.right, values)
        if e.op == "||":
            return eval_expr(e.left, values) or eval_expr(e.right, values)
        lv = eval_expr(e.left, values)
        rv = eval_expr(e.right, values)
        if e.op == "==":
            return lv == rv
        if e.op == "!=":
            return lv != rv
        if e.op == "<":
            return lv < rv
        if e.op == "<=":
            return lv <= rv
        if e.op == ">":
            return lv > rv
        if e.op == ">=":
            return lv >= rv
        if e.op == "+":
            return _wrap(lv + rv, e.ty)
        if e.op == "-":
            return _wrap(lv - rv, e.ty)
        if e.op == "*":
            return _wrap(lv * rv, e.ty)
    raise MiniProcError(f"cannot evaluate {e!r}")


def _wrap(value: int, ty: Ty) -> int:
    mask = (1 << ty.width) - 1
    v = value & mask
    if ty.signed and v >> (ty.width - 1):
        v -= 1 << ty.width
    return v


# ---------------------------------------------------------------------------
# SMT encoding of the automaton alongside a formula encoding


class ModelEncoding(AssertGroups):
    """Constraints tying the word in an unraveling to a program's runs."""

    def __init__(self, opa: ProgramAutomaton, enc: FormulaEncoding):
        self.opa = opa
        self.enc = enc
        missing = [a for a in opa.atoms if a not in enc.aps]
        if missing:
            raise EncodingError(
                f"the formula encoding lacks the program atoms {missing}"
            )
        self.wl = max(1, (len(opa.location_names) - 1).bit_length())
        self._var_fun = {
            qual: f"val_{_mangle(qual)}" for qual in sorted(opa.variables)
        }
        self._draw_fun = {
            qual: f"draw_{_mangle(qual)}" for qual in sorted(opa.draws)
        }

    # term builders ----------------------------------------------------

    def pc(self, x) -> SExpr:
        return ("pc", self.enc._idx(x))

    def val(self, qual: str, x) -> SExpr:
        return (self._var_fun[qual], self.enc._idx(x))

    def loc_lit(self, loc: int) -> SExpr:
        return bv_lit(loc, self.wl)

    def _default_env(self, x) -> dict[str, SExpr]:
        return {qual: self.val(qual, x) for qual in self.opa.variables}

    def compile_expr(self, e: Expr, env: dict[str, SExpr], x) -> SExpr:
        """The SMT term of an expression under a symbolic environment."""
        if isinstance(e, ELit):
            return bv_lit(e.value % (1 << e.ty.width), e.ty.width)
        if isinstance(e, EBoolLit):
            return "true" if e.value else "false"
        if isinstance(e, EVar):
            return env[e.resolved]
        if isinstance(e, EIndex):
            return self._read_element(e.resolved, e.index, env, x, e.ty)
        if isinstance(e, EUn):
            if e.op == "!":
                return neg(self.compile_expr(e.arg, env, x))
            return ("bvneg", self.compile_expr(e.arg, env, x))
        if isinstance(e, EBin):
            lt = self.compile_expr(e.left, env, x)
            rt = self.compile_expr(e.right, env, x)
            if e.op == "&&":
                return conj([lt, rt])
            if e.op == "||":
                return disj([lt, rt])
            if e.op == "==":
                return equals(lt, rt)
            if e.op == "!=":
                return neg(equals(lt, rt))
            signed = isinstance(e.left.ty, Ty) and e.left.ty.signed
            cmps = {
                "<": "bvslt" if signed else "bvult",
                "<=": "bvsle" if signed else "bvule",
                ">": "bvsgt" if signed else "bvugt",
                ">=": "bvsge" if signed else "bvuge",
            }
            if e.op in cmps:
                return (cmps[e.op], lt, rt)
            arith = {"+": "bvadd", "-": "bvsub", "*": "bvmul"}
            return (arith[e.op], lt, rt)
        raise EncodingError(f"cannot compile {e!r}")

    def _elements(self, base: str) -> list[tuple[int, str]]:
        out = []
        i = 0
        while f"{base}[{i}]" in self.opa.variables:
            out.append((i, f"{base}[{i}]"))
            i += 1
        return out

    def _read_element(self, base, index: Expr, env, x, ty: Ty) -> SExpr:
        elems = self._elements(base)
        if isinstance(index, ELit):
            for i, qual in elems:
                if i == index.value:
                    return env[qual]
            return bv_lit(0, ty.width)
        idx = self.compile_expr(index, env, x)
        term: SExpr = bv_lit(0, ty.width)
        for i, qual in reversed(elems):
            if i >= (1 << index.ty.width):
                continue
            term = ("ite", equals(idx, bv_lit(i, index.ty.width)), env[qual], term)
        return term

    def _apply_steps(
        self, steps: Sequence, x: int
    ) -> tuple[list[SExpr], dict[str, SExpr]]:
        """Guards collected and the environment after all assignments."""
        env = self._default_env(x)
        guards: list[SExpr] = []
        for st in steps:
            if isinstance(st, GuardStep):
                guards.append(self.compile_expr(st.expr, env, x))
            elif isinstance(st, AssignStep):
                if st.expr is None:
                    value: SExpr = (f"{self._draw_fun[st.target]}_{st.draw}",
                                    self.enc._idx(x))
                else:
                    value = self.compile_expr(st.expr, env, x)
                if st.index is None:
                    env[st.target] = value
                else:
                    self._write_element(st.target, st.index, value, env, x)
            elif isinstance(st, CallStep):
                callee = self.opa.program.function(st.callee)
                bound: dict[str, SExpr] = {}
                for param, arg in zip(callee.params, st.args):
                    qual = f"{st.callee}.{param.name}"
                    if param.byref:
                        bound[qual] = env[arg.resolved]
                    else:
                        bound[qual] = self.compile_expr(arg, env, x)
                for qual in self.opa.locals_of[st.callee]:
                    env[qual] = bound.get(qual, bv_lit(0, self.opa.variables[qual].width))
            elif isinstance(st, ReturnStep):
                site = st.site
                if site.caller is not None:
                    for qual in self.opa.locals_of[site.caller]:
                        env[qual] = (self._var_fun[qual], self.enc.stk(x))
                if st.copy_out:
                    callee = self.opa.program.function(site.callee)
                    for param, arg in zip(callee.params, site.args):
                        if param.byref:
                            env[arg.resolved] = self.val(
                                f"{site.callee}.{param.name}", x
                            )
            else:
                raise EncodingError(f"unknown step {st!r}")
        return guards, env

    def _transition_term(self, tr, x: int, consuming: bool) -> SExpr:
        parts: list[SExpr] = [equals(self.pc(x), self.loc_lit(tr.source))]
        if isinstance(tr, PopTransition):
            parts.append(equals(self.pc(self.enc.stk(x)), self.loc_lit(tr.saved)))
        if consuming:
            for p in sorted(tr.label):
                parts.append(self.enc.gam(self.enc.sym(p), x))
            pinned = set(self.opa.label_pool) - set(tr.label)
            for p in sorted(pinned):
                parts.append(neg(self.enc.gam(self.enc.sym(p), x)))
        guards, env = self._apply_steps(tr.steps, x)
        parts += guards
        parts.append(equals(self.pc(x + 1), self.loc_lit(tr.target)))
        for qual in sorted(self.opa.variables):
            parts.append(equals(self.val(qual, x + 1), env[qual]))
        return conj(parts)

    # assertion groups -------------------------------------------------

    def extra_declarations(self) -> list[SExpr]:
        n_sort = self.enc.names.n_sort
        out: list[SExpr] = [
            ("declare-fun", "pc", (n_sort,), bv_sort(self.wl)),
        ]
        for qual in sorted(self.opa.variables):
            out.append(
                (
                    "declare-fun",
                    self._var_fun[qual],
                    (n_sort,),
                    bv_sort(self.opa.variables[qual].width),
                )
            )
        for qual in sorted(self.opa.draws):
            for i in range(self.opa.draws[qual]):
                out.append(
                    (
                        "declare-fun",
                        f"{self._draw_fun[qual]}_{i}",
                        (n_sort,),
                        bv_sort(self._draw_width(qual)),
                    )
                )
        return out

    def _draw_width(self, qual: str) -> int:
        if qual in self.opa.variables:
            return self.opa.variables[qual].width
        return self.opa.variables[f"{qual}[0]"].width

    def _range_at(self, x: int) -> list[SExpr]:
        return [
            ("bvule", self.pc(x), self.loc_lit(len(self.opa.location_names) - 1))
        ]

    def _labeling_at(self, x: int) -> list[SExpr]:
        """Variable-backed and observed atoms at a consuming node."""
        enc = self.enc
        parts: list[SExpr] = []
        for atom in sorted(self.opa.varap):
            qual = self.opa.varap[atom]
            width = self.opa.variables[qual].width
            parts.append(
                equals(
                    enc.gam(enc.sym(atom), x),
                    neg(equals(self.val(qual, x), bv_lit(0, width))),
                )
            )
        env = self._default_env(x)
        for name in sorted(self.opa.obs):
            parts.append(
                equals(
                    enc.gam(enc.sym(name), x),
                    self.compile_expr(self.opa.obs[name], env, x),
                )
            )
        if not parts:
            return []
        guard = disj([enc.is_push(x), enc.is_shift(x)])
        return [implies(guard, conj(parts))]

    def _steps_at(self, x: int) -> list[SExpr]:
        enc = self.enc
        return [
            implies(
                enc.is_push(x),
                disj([self._transition_term(t, x, True) for t in self.opa.pushes]),
            ),
            implies(
                enc.is_shift(x),
                disj([self._transition_term(t, x, True) for t in self.opa.shifts]),
            ),
            implies(
                enc.is_pop(x),
                disj([self._transition_term(t, x, False) for t in self.opa.pops]),
            ),
        ]

    def base_asserts(self) -> list[SExpr]:
        enc = self.enc
        out: list[SExpr] = [
            equals(self.pc(1), self.loc_lit(self.opa.initial)),
            neg(enc.gam(enc.sym(TERM), 1)),
        ]
        for qual in sorted(self.opa.variables):
            width = self.opa.variables[qual].width
            start = self.opa.initials.get(qual, 0) % (1 << width)
            out.append(equals(self.val(qual, 1), bv_lit(start, width)))
        out += self._range_at(1)
        out += self._labeling_at(1)
        return out

    def slice_asserts(self, k: int) -> list[SExpr]:
        out: list[SExpr] = []
        out += self._range_at(k)
        out += self._labeling_at(k)
        out += self._steps_at(k - 1)
        return out

    def grouped_base(self, k: int) -> list[SExpr]:
        out = self.base_asserts()[:]
        for x in range(2, k + 1):
            out += self._range_at(x)
        return out

    def grouped_steps(self, k: int) -> list[SExpr]:
        out: list[SExpr] = []
        for x in range(1, k):
            out += self._steps_at(x)
        return out

    def grouped_rejections(self, k: int) -> list[SExpr]:
        out: list[SExpr] = []
        for x in range(2, k + 1):
            out += self._labeling_at(x)
        return out

    # decoding ---------------------------------------------------------

    def decode(self, session, k: int):
        """Per-node run data from the current model: location, kind,
        pending structural symbol, atom set, stack link, and values."""
        from .op_alphabet import Prec
        from .terms import parse_bv

        enc = self.enc
        queries: list[SExpr] = []
        for x in range(1, k + 1):
            queries.append(self.pc(x))
            queries.append(enc.smb(x))
            queries.append(enc.struct(x))
            queries.append(enc.stk(x))
            for qual in sorted(self.opa.variables):
                queries.append(self.val(qual, x))
            for atom in self.opa.atoms:
                queries.append(enc.gam(enc.sym(atom), x))
            for qual in sorted(self.opa.draws):
                for i in range(self.opa.draws[qual]):
                    queries.append((f"{self._draw_fun[qual]}_{i}", enc._idx(x)))
        values = session.get_values(queries)

        def read(term: SExpr) -> int:
            got = parse_bv(values[render(term)])
            if got is None:
                raise EncodingError(f"unreadable model value for {render(term)}")
            return got[0]

        kind_of = {Prec.YIELDS: "push", Prec.EQUALS: "shift", Prec.TAKES: "pop"}
        nodes = []
        for x in range(1, k + 1):
            loc = read(self.pc(x))
            name = (
                self.opa.location_names[loc]
                if loc < len(self.opa.location_names)
                else f"?{loc}"
            )
            smb_sym = enc.structural_of_value(read(enc.smb(x)))
            struct_sym = enc.structural_of_value(read(enc.struct(x)))
            stack = read(enc.stk(x))
            if smb_sym is None or struct_sym is None:
                kind = "?"
            else:
                rel = self.opa.matrix.prec(smb_sym, struct_sym)
                kind = kind_of.get(rel, "end")
            props = frozenset(
                atom
                for atom in self.opa.atoms
                if values[render(enc.gam(enc.sym(atom), x))] == "true"
            )
            vals = {}
            for qual in sorted(self.opa.variables):
                ty = self.opa.variables[qual]
                raw = read(self.val(qual, x))
                if ty.signed and raw >> (ty.width - 1):
                    raw -= 1 << ty.width
                vals[qual] = raw
            drawn = {}
            for qual in sorted(self.opa.draws):
                for i in range(self.opa.draws[qual]):
                    drawn[f"{qual}#{i}"] = read(
                        (f"{self._draw_fun[qual]}_{i}", enc._idx(x))
                    )
            nodes.append(
                {
                    "location": name,
                    "kind": kind,
                    "symbol": struct_sym,
                    "stack": stack,
                    "props": props,
                    "values": vals,
                    "draws": drawn,
                }
            )
        return tuple(nodes)

    def _write_element(self, base, index, value, env, x) -> None:
        elems = self._elements(base)
        if isinstance(index, ELit):
            for i, qual in elems:
                if i == index.value:
                    env[qual] = value
            return
        idx = self.compile_expr(index, env, x)
        for i, qual in elems:
            if i >= (1 << index.ty.width):
                continue
            env[qual] = (
                "ite", equals(idx, bv_lit(i, index.ty.width)), value, env[qual]
            )


def _mangle(qual: str) -> str:
    return qual.replace(".", "_").replace("[", "_").replace("]", "")
