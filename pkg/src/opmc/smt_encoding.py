"""Bounded satisfiability of the logic as quantifier-free SMT problems.

The encoding mirrors the explicit tableau: node ``x`` of a branch is
described by the content predicate ``gam(s, x)``, the symbol functions
``smb``/``struct``, and the back-links ``stk``/``ctx``.  Precedence
between structural symbols is a fixed table, so the node kinds (push,
shift, pop) are defined functions of the symbols.  Delivery and
rejection rules are instantiated per node index up to the bound, which
keeps every assertion quantifier free.

Instantiations are organized in slices: slice ``k`` contains exactly the
assertions whose highest node index is ``k``.  The slices are monotone,
so one incremental solver session serves every bound up to the maximum,
with the acceptance condition for the current bound pushed in a
disposable scope.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

from .op_alphabet import OpMatrix, Prec, TERM
from .potl import (
    Atom,
    ChainNext,
    Dir,
    Eventually,
    Formula,
    Globally,
    HNext,
    HRelease,
    HUntil,
    Next,
    OpWord,
    Release,
    Until,
    WChainNext,
    WHNext,
    WNext,
    Zeta,
    And as FAnd,
    FalseConst,
    Not as FNot,
    Or as FOr,
    TrueConst,
    atoms_of,
    nnf,
    pretty,
    subformulas,
    xnf,
)
from .solver import SolverSession
from .terms import (
    SExpr,
    bv_lit,
    bv_sort,
    conj,
    disj,
    equals,
    implies,
    neg,
    parse_bv,
    render,
)


class EncodingError(ValueError):
    """Raised for formulas or parameters the encoding cannot express."""


def _key(f: Formula) -> tuple[str, str]:
    return (pretty(f), repr(f))


def _bits_for(count: int) -> int:
    return max(1, (count - 1).bit_length())


_STRONG_CLASSES = (Next, ChainNext, HNext)
_NEXT_CLASSES = (Next, WNext, ChainNext, WChainNext, HNext, WHNext)


def closure_obligations(root: Formula) -> list[Formula]:
    """Next-style obligations reachable from a normalized formula.

    These are the formulas that live in node content alongside literals:
    explicit next-style subformulas plus the carriers introduced when
    until/release-style subformulas are unrolled.
    """
    found: dict[tuple[str, str], Formula] = {}

    def add(f: Formula) -> None:
        found.setdefault(_key(f), f)

    for sub in subformulas(root):
        if isinstance(sub, _NEXT_CLASSES):
            add(sub)
        elif isinstance(sub, Until):
            add(Next(sub.dir, sub))
            add(ChainNext(sub.dir, sub))
        elif isinstance(sub, Release):
            add(WNext(sub.dir, sub))
            add(WChainNext(sub.dir, sub))
        elif isinstance(sub, HUntil):
            add(HNext(sub.dir, sub))
        elif isinstance(sub, HRelease):
            add(WHNext(sub.dir, sub))
        elif isinstance(sub, Globally):
            add(WNext(Dir.DOWN, sub))
            add(WNext(Dir.UP, sub))
        elif isinstance(sub, Eventually):
            add(Next(Dir.DOWN, sub))
            add(Next(Dir.UP, sub))
    return [found[k] for k in sorted(found)]


@dataclass(frozen=True)
class _Names:
    """Fixed identifiers used throughout the emitted SMT text."""

    gam: str = "gam"
    smb: str = "smb"
    struct: str = "struct"
    stk: str = "stk"
    ctx: str = "ctx"
    sbar: str = "sbar"
    lt: str = "prec_lt"
    eq: str = "prec_eq"
    gt: str = "prec_gt"
    push: str = "is_push"
    shift: str = "is_shift"
    pop: str = "is_pop"
    s_sort: str = "S"
    n_sort: str = "N"


class FormulaEncoding:
    """One formula over one matrix, unrolled up to a maximum bound."""

    def __init__(
        self,
        matrix: OpMatrix,
        formula: Formula,
        aps: Sequence[str] = (),
        max_k: int = 50,
    ):
        matrix.check_complete()
        if max_k < 1:
            raise EncodingError("the bound must be at least one")
        self.matrix = matrix
        self.formula = formula
        self.root = nnf(formula)
        self.aps = tuple(sorted(set(aps)))
        self.max_k = max_k
        self.names = _Names()

        unknown = atoms_of(self.root) - set(matrix.symbols) - {TERM} - set(self.aps)
        if unknown:
            raise EncodingError(
                f"atoms {sorted(unknown)} are neither structural nor declared"
            )

        self.obligations = closure_obligations(self.root)
        self.structural = [TERM] + sorted(matrix.symbols)
        # symbol table: structural symbols, propositions, obligations, markers
        self._sym_names: dict[tuple[str, str] | str, str] = {}
        self._sym_order: list[tuple[str, SExpr]] = []  # (name, comment source)
        for s in self.structural:
            self._intern(s, f"sym_{_safe(s)}")
        for p in self.aps:
            self._intern(p, f"ap_{_safe(p)}")
        for i, f in enumerate(self.obligations):
            self._intern(_key(f), f"ob{i}", comment=pretty(f))
        self._intern(_key(Zeta(Dir.DOWN)), "marker_down", comment="down family member")
        self._intern(_key(Zeta(Dir.UP)), "marker_up", comment="up family member")

        self.ws = _bits_for(len(self._sym_order))
        self.wn = _bits_for(max_k + 1)
        self._sym_value = {
            name: i for i, (name, _) in enumerate(self._sym_order)
        }

    # -- symbol table ---------------------------------------------------

    def _intern(self, key, name: str, comment: str | None = None) -> None:
        if key in self._sym_names:
            raise EncodingError(f"duplicate symbol {key!r}")
        self._sym_names[key] = name
        self._sym_order.append((name, comment))

    def sym(self, key) -> SExpr:
        """The named constant for a structural symbol, proposition,
        obligation key, or family marker."""
        return self._sym_names[key]

    def sym_of(self, f: Formula) -> SExpr:
        if isinstance(f, Atom):
            return self.sym(f.name)
        return self.sym(_key(f))

    def value_of_symbol(self, name: str) -> int:
        return self._sym_value[name]

    def symbol_of_value(self, value: int) -> str | None:
        if 0 <= value < len(self._sym_order):
            return self._sym_order[value][0]
        return None

    def structural_of_value(self, value: int) -> str | None:
        """The structural symbol a model value denotes, if any."""
        name = self.symbol_of_value(value)
        for s in self.structural:
            if self._sym_names[s] == name:
                return s
        return None

    # -- term builders --------------------------------------------------

    def n_lit(self, i: int) -> SExpr:
        return bv_lit(i, self.wn)

    def _idx(self, x) -> SExpr:
        return self.n_lit(x) if isinstance(x, int) else x

    def gam(self, sym: SExpr, x) -> SExpr:
        return (self.names.gam, sym, self._idx(x))

    def smb(self, x) -> SExpr:
        return (self.names.smb, self._idx(x))

    def struct(self, x) -> SExpr:
        return (self.names.struct, self._idx(x))

    def stk(self, x) -> SExpr:
        return (self.names.stk, self._idx(x))

    def ctx(self, x) -> SExpr:
        return (self.names.ctx, self._idx(x))

    def is_push(self, x) -> SExpr:
        return (self.names.push, self._idx(x))

    def is_shift(self, x) -> SExpr:
        return (self.names.shift, self._idx(x))

    def is_pop(self, x) -> SExpr:
        return (self.names.pop, self._idx(x))

    def _rel(self, name: str, a: SExpr, b: SExpr) -> SExpr:
        return (name, a, b)

    def _dirpr(self, d: Dir, a: SExpr, b: SExpr) -> SExpr:
        """Context relation compatible with the direction."""
        first = self.names.lt if d is Dir.DOWN else self.names.gt
        return disj([
            self._rel(first, a, b),
            self._rel(self.names.eq, a, b),
        ])

    def ground(self, f: Formula, x) -> SExpr:
        """The content reading of a formula at one node index.

        Literals become content tests, next-style obligations their named
        constants, and anything unrolled is read through its unrolling.
        """
        if isinstance(f, TrueConst):
            return "true"
        if isinstance(f, FalseConst):
            return "false"
        if isinstance(f, Atom):
            return self.gam(self.sym(f.name), x)
        if isinstance(f, Zeta):
            return self.gam(self.sym(_key(f)), x)
        if isinstance(f, FNot):
            return neg(self.ground(f.arg, x))
        if isinstance(f, FAnd):
            return conj([self.ground(f.left, x), self.ground(f.right, x)])
        if isinstance(f, FOr):
            return disj([self.ground(f.left, x), self.ground(f.right, x)])
        if isinstance(f, _NEXT_CLASSES):
            return self.gam(self.sym(_key(f)), x)
        if isinstance(f, (Until, Release, HUntil, HRelease, Globally, Eventually)):
            return self.ground(xnf(f), x)
        raise EncodingError(f"cannot ground {f!r}")

    def _family(self, cls, d: Dir) -> list[Formula]:
        return [f for f in self.obligations if isinstance(f, cls) and f.dir is d]

    def _any_of(self, fam: Sequence[Formula], x) -> SExpr:
        return disj([self.gam(self.sym_of(f), x) for f in fam])

    def _gamma_equal(self, a, b) -> SExpr:
        """Same content on both node indexes, over the whole symbol table."""
        terms = []
        for name, _ in self._sym_order:
            terms.append(equals(self.gam(name, a), self.gam(name, b)))
        return conj(terms)

    # -- declarations ---------------------------------------------------

    def declarations(self) -> list[SExpr]:
        n = self.names
        s_sort = bv_sort(self.ws)
        n_sort = bv_sort(self.wn)
        out: list[SExpr] = [
            ("set-logic", "QF_UFBV"),
            ("define-sort", n.s_sort, (), s_sort),
            ("define-sort", n.n_sort, (), n_sort),
        ]
        for i, (name, _comment) in enumerate(self._sym_order):
            out.append(("define-fun", name, (), n.s_sort, bv_lit(i, self.ws)))
        out.append(
            (
                "define-fun",
                n.sbar,
                (("s", n.s_sort),),
                "Bool",
                disj([equals("s", self._sym_names[s]) for s in self.structural]),
            )
        )
        for rel_name, prec in (
            (n.lt, Prec.YIELDS),
            (n.eq, Prec.EQUALS),
            (n.gt, Prec.TAKES),
        ):
            cases = []
            for a in self.structural:
                for b in self.structural:
                    if self.matrix.prec(a, b) is prec:
                        cases.append(
                            conj([
                                equals("a", self._sym_names[a]),
                                equals("b", self._sym_names[b]),
                            ])
                        )
            out.append(
                (
                    "define-fun",
                    rel_name,
                    (("a", n.s_sort), ("b", n.s_sort)),
                    "Bool",
                    disj(cases),
                )
            )
        out.append(("declare-fun", n.gam, (n.s_sort, n.n_sort), "Bool"))
        out.append(("declare-fun", n.smb, (n.n_sort,), n.s_sort))
        out.append(("declare-fun", n.struct, (n.n_sort,), n.s_sort))
        out.append(("declare-fun", n.stk, (n.n_sort,), n.n_sort))
        out.append(("declare-fun", n.ctx, (n.n_sort,), n.n_sort))
        for kind_name, rel_name in (
            (n.push, n.lt),
            (n.shift, n.eq),
            (n.pop, n.gt),
        ):
            out.append(
                (
                    "define-fun",
                    kind_name,
                    (("x", n.n_sort),),
                    "Bool",
                    (rel_name, (n.smb, "x"), (n.struct, "x")),
                )
            )
        return out

    # -- per-node assertion groups --------------------------------------

    def axioms_at(self, x: int) -> list[SExpr]:
        out = [
            (self.names.sbar, self.struct(x)),
            (self.names.sbar, self.smb(x)),
            self.gam(self.struct(x), x),
            ("bvule", self.stk(x), self.n_lit(self.max_k)),
            ("bvule", self.ctx(x), self.n_lit(self.max_k)),
        ]
        return out

    def init_asserts(self) -> list[SExpr]:
        zero = self.n_lit(0)
        term_sym = self.sym(TERM)
        out: list[SExpr] = [
            equals(self.stk(0), zero),
            equals(self.ctx(0), zero),
            equals(self.struct(0), term_sym),
            equals(self.smb(0), term_sym),
            equals(self.smb(1), term_sym),
            equals(self.stk(1), zero),
            equals(self.ctx(1), zero),
            self.ground(self.root, 1),
        ]
        # the bottom node carries no content except the delimiter, so
        # back-links to it read as empty content
        for name, _ in self._sym_order:
            if name == term_sym:
                out.append(self.gam(name, 0))
            else:
                out.append(neg(self.gam(name, 0)))
        return out

    def step_at(self, x: int) -> list[SExpr]:
        """Transition from node ``x`` to ``x + 1``, guarded by kind."""
        nxt = x + 1
        deliveries = []
        for f in self.obligations:
            if isinstance(f, Next):
                deliveries.append(
                    implies(self.gam(self.sym_of(f), x), self.ground(f.arg, nxt))
                )
        deliver = conj(deliveries)
        zero = self.n_lit(0)

        push_parts = [
            deliver,
            equals(self.smb(nxt), self.struct(x)),
            equals(self.stk(nxt), self.n_lit(x)),
            implies(equals(self.stk(x), zero), equals(self.ctx(nxt), zero)),
            implies(
                conj([
                    neg(equals(self.stk(x), zero)),
                    disj([self.is_push(x - 1), self.is_shift(x - 1)]),
                ]),
                equals(self.ctx(nxt), self.n_lit(x - 1)),
            ),
            implies(
                conj([neg(equals(self.stk(x), zero)), self.is_pop(x - 1)]),
                equals(self.ctx(nxt), self.ctx(x - 1)),
            ),
        ]
        shift_parts = [
            deliver,
            equals(self.smb(nxt), self.struct(x)),
            equals(self.stk(nxt), self.stk(x)),
            equals(self.ctx(nxt), self.ctx(x)),
        ]
        pop_parts = [
            self._gamma_equal(x, nxt),
            equals(self.smb(nxt), self.smb(self.stk(x))),
            equals(self.stk(nxt), self.stk(self.stk(x))),
            equals(self.ctx(nxt), self.ctx(self.stk(x))),
        ]
        return [
            implies(self.is_push(x), conj(push_parts)),
            implies(self.is_shift(x), conj(shift_parts)),
            implies(self.is_pop(x), conj(pop_parts)),
        ]

    def single_symbol_at(self, x: int) -> list[SExpr]:
        """At most one structural symbol in the content of a node."""
        out = []
        for i, a in enumerate(self.structural):
            for b in self.structural[i + 1 :]:
                out.append(
                    neg(conj([self.gam(self.sym(a), x), self.gam(self.sym(b), x)]))
                )
        return out

    def delimiter_content_at(self, x: int) -> list[SExpr]:
        """Delimiter nodes carry no propositions and no strong obligations."""
        banned: list[SExpr] = []
        for p in self.aps:
            banned.append(neg(self.gam(self.sym(p), x)))
        for f in self.obligations:
            if isinstance(f, _STRONG_CLASSES):
                banned.append(neg(self.gam(self.sym_of(f), x)))
        banned.append(neg(self.gam(self.sym(_key(Zeta(Dir.DOWN))), x)))
        banned.append(neg(self.gam(self.sym(_key(Zeta(Dir.UP))), x)))
        return [implies(self.gam(self.sym(TERM), x), conj(banned))]

    def next_blocked_at(self, x: int) -> list[SExpr]:
        """Strong adjacent obligations forbid an incompatible next relation."""
        guard = disj([self.is_push(x - 1), self.is_shift(x - 1)])
        clashes = []
        for f in self._family(Next, Dir.DOWN):
            clashes.append(
                neg(
                    conj([
                        self.gam(self.sym_of(f), x - 1),
                        self._rel(self.names.gt, self.struct(x - 1), self.struct(x)),
                    ])
                )
            )
        for f in self._family(Next, Dir.UP):
            clashes.append(
                neg(
                    conj([
                        self.gam(self.sym_of(f), x - 1),
                        self._rel(self.names.lt, self.struct(x - 1), self.struct(x)),
                    ])
                )
            )
        if not clashes:
            return []
        return [implies(guard, conj(clashes))]

    def weak_next_at(self, x: int) -> list[SExpr]:
        """Weak adjacent obligations deliver when the relation fits."""
        guard = disj([self.is_push(x - 1), self.is_shift(x - 1)])
        parts = []
        for f in self._family(WNext, Dir.DOWN):
            parts.append(
                implies(
                    conj([
                        self.gam(self.sym_of(f), x - 1),
                        neg(
                            self._rel(
                                self.names.gt, self.struct(x - 1), self.struct(x)
                            )
                        ),
                    ]),
                    self.ground(f.arg, x),
                )
            )
        for f in self._family(WNext, Dir.UP):
            parts.append(
                implies(
                    conj([
                        self.gam(self.sym_of(f), x - 1),
                        neg(
                            self._rel(
                                self.names.lt, self.struct(x - 1), self.struct(x)
                            )
                        ),
                    ]),
                    self.ground(f.arg, x),
                )
            )
        if not parts:
            return []
        return [implies(guard, conj(parts))]

    def chain_next_at(self, x: int) -> list[SExpr]:
        """Strong chain obligations of the closed frame must be fulfilled.

        When node ``x`` pops, every carrier node of the frame being
        closed must have each of its chain obligations discharged by
        some pop landing inside the window.
        """
        fams = {
            Dir.DOWN: self._family(ChainNext, Dir.DOWN),
            Dir.UP: self._family(ChainNext, Dir.UP),
        }
        if not fams[Dir.DOWN] and not fams[Dir.UP]:
            return []
        parts = []
        for y in range(1, x):
            carrier = disj([
                equals(self.stk(x), self.n_lit(y)),
                equals(self.stk(y), self.stk(x)),
            ])
            obligations = []
            for d in (Dir.DOWN, Dir.UP):
                for f in fams[d]:
                    witnesses = []
                    for z in range(y, x + 1):
                        witnesses.append(
                            conj([
                                self.is_pop(z),
                                equals(self.ctx(z), self.n_lit(y)),
                                self._dirpr(d, self.struct(y), self.struct(z)),
                                self.ground(f.arg, z),
                            ])
                        )
                    obligations.append(
                        implies(self.gam(self.sym_of(f), y), disj(witnesses))
                    )
            if obligations:
                parts.append(implies(carrier, conj(obligations)))
        if not parts:
            return []
        return [implies(self.is_pop(x), conj(parts))]

    def weak_chain_next_at(self, x: int) -> list[SExpr]:
        """Weak chain obligations of the chain context deliver at the pop."""
        parts = []
        for d in (Dir.DOWN, Dir.UP):
            for f in self._family(WChainNext, d):
                parts.append(
                    implies(
                        conj([
                            self.gam(self.sym_of(f), self.ctx(x)),
                            self._dirpr(d, self.struct(self.ctx(x)), self.struct(x)),
                        ]),
                        self.ground(f.arg, x),
                    )
                )
        if not parts:
            return []
        return [implies(self.is_pop(x), conj(parts))]

    def up_family_condition_at(self, x: int) -> list[SExpr]:
        """Up-family content only sits at pops or at member positions."""
        fam = self._family(HNext, Dir.UP)
        if not fam:
            return []
        member = conj([self.is_push(x), self.is_pop(x - 1)])
        return [
            implies(self._any_of(fam, x), disj([self.is_pop(x), member]))
        ]

    def up_next_at(self, x: int) -> list[SExpr]:
        """Strong up-family successors: delivered at the following member."""
        fam = self._family(HNext, Dir.UP)
        if not fam:
            return []
        parts = []
        for f in fam:
            parts.append(
                implies(
                    self.gam(self.sym_of(f), self.stk(x - 1)),
                    conj([self.ground(f.arg, x - 1), self.is_push(x)]),
                )
            )
        return [implies(self.is_pop(x - 1), conj(parts))]

    def weak_up_next_at(self, x: int) -> list[SExpr]:
        """Weak up-family successors deliver between consecutive members."""
        fam = self._family(WHNext, Dir.UP)
        if not fam:
            return []
        prev_member = self.stk(x - 1)
        guard = conj([
            self.is_pop(x - 1),
            self.is_push(x),
            self.is_pop(("bvsub", prev_member, self.n_lit(1))),
            self.is_push(prev_member),
        ])
        parts = [
            implies(self.gam(self.sym_of(f), prev_member), self.ground(f.arg, x - 1))
            for f in fam
        ]
        return [implies(guard, conj(parts))]

    def down_family_condition_at(self, x: int) -> list[SExpr]:
        """Down-family content forces the shape of the following node."""
        fam = self._family(HNext, Dir.DOWN)
        if not fam:
            return []
        return self._down_condition(self._any_of(fam, x), self._any_of_at_ctx(fam, x), x)

    def _any_of_at_ctx(self, fam, x) -> SExpr:
        return disj([self.gam(self.sym_of(f), self.ctx(x)) for f in fam])

    def _down_condition(self, any_here: SExpr, any_ctx: SExpr, x: int) -> list[SExpr]:
        return [
            implies(
                conj([neg(self.is_pop(x)), any_here]),
                self.is_push(x + 1),
            ),
            implies(
                conj([self.is_pop(x), any_ctx]),
                neg(self.is_shift(x + 1)),
            ),
        ]

    def down_next_at(self, x: int) -> list[SExpr]:
        """Strong down-family successors across consecutive closing pops."""
        fam = self._family(HNext, Dir.DOWN)
        if not fam:
            return []
        guard = conj([self.is_pop(x - 1), self.is_pop(x)])
        parts = []
        for f in fam:
            parts.append(
                implies(
                    self.gam(self.sym_of(f), self.ctx(x - 1)),
                    conj([
                        self.ground(f.arg, self.ctx(x - 2)),
                        self.is_pop(x - 2),
                    ]),
                )
            )
        return [implies(guard, conj(parts))]

    def weak_down_next_at(self, x: int) -> list[SExpr]:
        """Weak down-family successors across three consecutive pops."""
        fam = self._family(WHNext, Dir.DOWN)
        if not fam or x < 3:
            return []
        guard = conj([self.is_pop(x - 2), self.is_pop(x - 1), self.is_pop(x)])
        parts = [
            implies(
                self.gam(self.sym_of(f), self.ctx(x - 1)),
                self.ground(f.arg, self.ctx(x - 2)),
            )
            for f in fam
        ]
        return [implies(guard, conj(parts))]

    def down_marker_condition_at(self, x: int) -> list[SExpr]:
        """The down-family marker forces the same shapes as its content."""
        zd = self.sym(_key(Zeta(Dir.DOWN)))
        return self._down_condition(
            self.gam(zd, x), self.gam(zd, self.ctx(x)), x
        )

    def down_marker_at(self, x: int) -> list[SExpr]:
        """Consecutive closing pops prove down-family membership."""
        zd = self.sym(_key(Zeta(Dir.DOWN)))
        guard = conj([self.is_pop(x - 1), self.is_pop(x)])
        return [implies(guard, self.gam(zd, self.ctx(x - 1)))]

    def up_marker_at(self, x: int) -> list[SExpr]:
        """The up-family marker holds exactly at member positions and pops."""
        zu = self.sym(_key(Zeta(Dir.UP)))
        member = conj([self.is_push(x), self.is_pop(x - 1)])
        return [
            implies(self.gam(zu, x), disj([self.is_pop(x), member])),
            implies(member, self.gam(zu, x)),
        ]

    def twin_at(self, x: int) -> list[SExpr]:
        """No step node repeats an equivalent pending ancestor."""
        zero = self.n_lit(0)
        parts = []
        for y in range(1, x):
            open_push = conj(
                [self.is_push(y)]
                + [
                    neg(conj([self.is_pop(z), equals(self.stk(z), self.n_lit(y))]))
                    for z in range(y + 1, x)
                ]
            )
            open_shift = conj(
                [self.is_shift(y)]
                + [
                    neg(conj([self.is_pop(z), equals(self.stk(z), self.stk(y))]))
                    for z in range(y + 1, x)
                ]
            )
            pending = disj([open_push, open_shift])
            same = conj([
                self._gamma_equal(x, y),
                equals(self.smb(x), self.smb(y)),
                self._gamma_equal(self.stk(x), self.stk(y)),
                self._gamma_equal(self.ctx(x), self.ctx(y)),
                equals(
                    equals(self.stk(x), zero), equals(self.stk(y), zero)
                ),
                equals(
                    equals(self.ctx(x), zero), equals(self.ctx(y), zero)
                ),
            ])
            parts.append(neg(conj([pending, same])))
        if not parts:
            return []
        guard = disj([self.is_push(x), self.is_shift(x)])
        return [implies(guard, conj(parts))]

    def freeze_at(self, x: int) -> list[SExpr]:
        """An accepted node repeats itself for the rest of the horizon."""
        zero = self.n_lit(0)
        accepted = conj([
            self.gam(self.sym(TERM), x),
            equals(self.stk(x), zero),
        ])
        frozen = conj([
            self._gamma_equal(x, x + 1),
            equals(self.smb(x + 1), self.sym(TERM)),
            equals(self.stk(x + 1), zero),
            equals(self.ctx(x + 1), zero),
        ])
        return [implies(accepted, frozen)]

    def stuck_at(self, x: int) -> list[SExpr]:
        """A node without a kind must be the accepted configuration."""
        no_kind = conj([
            neg(self.is_push(x)),
            neg(self.is_shift(x)),
            neg(self.is_pop(x)),
        ])
        accepted = conj([
            self.gam(self.sym(TERM), x),
            equals(self.stk(x), self.n_lit(0)),
        ])
        return [implies(no_kind, accepted)]

    def acceptance(self, k: int) -> SExpr:
        return conj([
            self.gam(self.sym(TERM), k),
            equals(self.stk(k), self.n_lit(0)),
        ])

    # -- slices ---------------------------------------------------------

    def base_asserts(self) -> list[SExpr]:
        """Everything whose highest node index is zero or one."""
        out: list[SExpr] = []
        out += self.axioms_at(0)
        out += self.axioms_at(1)
        out += self.init_asserts()
        out += self.single_symbol_at(1)
        out += self.delimiter_content_at(1)
        out += self.up_family_condition_at(1)
        out += self.up_marker_at(1)
        return out

    def slice_asserts(self, k: int) -> list[SExpr]:
        """Everything whose highest node index is ``k`` (for ``k >= 2``)."""
        if not 2 <= k <= self.max_k:
            raise EncodingError(f"slice {k} outside 2..{self.max_k}")
        out: list[SExpr] = []
        out += self.axioms_at(k)
        out += self.step_at(k - 1)
        out += self.single_symbol_at(k)
        out += self.delimiter_content_at(k)
        out += self.next_blocked_at(k)
        out += self.weak_next_at(k)
        out += self.chain_next_at(k)
        out += self.weak_chain_next_at(k)
        out += self.up_family_condition_at(k)
        out += self.up_next_at(k)
        out += self.weak_up_next_at(k)
        out += self.down_family_condition_at(k - 1)
        out += self.down_next_at(k)
        out += self.weak_down_next_at(k)
        out += self.down_marker_condition_at(k - 1)
        out += self.down_marker_at(k)
        out += self.up_marker_at(k)
        out += self.twin_at(k)
        out += self.freeze_at(k - 1)
        out += self.stuck_at(k - 1)
        return out

    def full_script(self, k: int, extra_groups: Sequence["AssertGroups"] = ()) -> str:
        """The complete problem at one bound as deterministic text.

        Order: declarations, then base facts, then transition rules, then
        rejection rules, then the acceptance condition.
        """
        if not 1 <= k <= self.max_k:
            raise EncodingError(f"bound {k} outside 1..{self.max_k}")
        decls = self.declarations()
        base: list[SExpr] = []
        steps: list[SExpr] = []
        rejections: list[SExpr] = []
        for g in (self,) + tuple(extra_groups):
            decls += g.extra_declarations() if g is not self else []
            base += g.grouped_base(k)
            steps += g.grouped_steps(k)
            rejections += g.grouped_rejections(k)
        lines = ["; bounded satisfiability problem", f"; bound {k}"]
        for d in decls:
            lines.append(render(d))
        lines.append("; base")
        for a in base:
            lines.append(render(("assert", a)))
        lines.append("; step")
        for a in steps:
            lines.append(render(("assert", a)))
        lines.append("; rejection")
        for a in rejections:
            lines.append(render(("assert", a)))
        lines.append("; acceptance")
        lines.append(render(("assert", self.acceptance(k))))
        lines.append("(check-sat)")
        return "\n".join(lines) + "\n"

    # regrouped views used by full_script ------------------------------

    def extra_declarations(self) -> list[SExpr]:
        return []

    def grouped_base(self, k: int) -> list[SExpr]:
        out: list[SExpr] = []
        for x in range(0, k + 1):
            out += self.axioms_at(x)
        out += self.init_asserts()
        return out

    def grouped_steps(self, k: int) -> list[SExpr]:
        out: list[SExpr] = []
        for x in range(1, k):
            out += self.step_at(x)
        return out

    def grouped_rejections(self, k: int) -> list[SExpr]:
        out: list[SExpr] = []
        for x in range(1, k + 1):
            out += self.single_symbol_at(x)
            out += self.delimiter_content_at(x)
            out += self.up_family_condition_at(x)
            out += self.up_marker_at(x)
        for x in range(2, k + 1):
            out += self.next_blocked_at(x)
            out += self.weak_next_at(x)
            out += self.chain_next_at(x)
            out += self.weak_chain_next_at(x)
            out += self.up_next_at(x)
            out += self.weak_up_next_at(x)
            out += self.down_next_at(x)
            out += self.weak_down_next_at(x)
            out += self.down_marker_at(x)
            out += self.twin_at(x)
        for x in range(1, k):
            out += self.down_family_condition_at(x)
            out += self.down_marker_condition_at(x)
            out += self.freeze_at(x)
            out += self.stuck_at(x)
        return out

    # -- decoding -------------------------------------------------------

    def decode_witness(self, session: SolverSession, k: int) -> OpWord:
        """Read the accepted branch out of the current model as a word."""
        queries: list[SExpr] = []
        for x in range(1, k + 1):
            queries.append(self.smb(x))
            queries.append(self.struct(x))
            queries.append(self.stk(x))
        label_syms = [(p, self.sym(p)) for p in self.aps]
        for x in range(1, k + 1):
            for _, sname in label_syms:
                queries.append(self.gam(sname, x))
        values = session.get_values(queries)

        def bv_of(term: SExpr) -> int:
            got = parse_bv(values[render(term)])
            if got is None:
                raise EncodingError(f"unreadable model value for {render(term)}")
            return got[0]

        entries: list[tuple[str, frozenset[str]]] = []
        for x in range(1, k + 1):
            struct_sym = self.structural_of_value(bv_of(self.struct(x)))
            smb_sym = self.structural_of_value(bv_of(self.smb(x)))
            if struct_sym is None or smb_sym is None:
                raise EncodingError(f"node {x} has no structural reading")
            if struct_sym == TERM:
                if bv_of(self.stk(x)) == 0:
                    return OpWord(self.matrix, tuple(entries))
                continue  # delimiter with open frames: closing pops follow
            rel = self.matrix.prec(smb_sym, struct_sym)
            if rel in (Prec.YIELDS, Prec.EQUALS):
                props = frozenset(
                    p
                    for p, sname in label_syms
                    if values[render(self.gam(sname, x))] == "true"
                )
                entries.append((struct_sym, props))
        raise EncodingError("model contains no accepted node")


class AssertGroups:
    """What an additional constraint provider contributes to a problem.

    The program side of a combined problem implements this interface.
    """

    def extra_declarations(self) -> list[SExpr]:
        raise NotImplementedError

    def base_asserts(self) -> list[SExpr]:
        raise NotImplementedError

    def slice_asserts(self, k: int) -> list[SExpr]:
        raise NotImplementedError

    def grouped_base(self, k: int) -> list[SExpr]:
        raise NotImplementedError

    def grouped_steps(self, k: int) -> list[SExpr]:
        raise NotImplementedError

    def grouped_rejections(self, k: int) -> list[SExpr]:
        raise NotImplementedError


@dataclass(frozen=True)
class BmcOutcome:
    status: str  #: ``sat``, ``unsat``, or ``budget``
    bound: int  #: last bound examined
    witness: OpWord | None = None
    payloads: tuple = ()  #: one entry per extra group with a decoder


def bmc_run(
    encoding: FormulaEncoding,
    extras: Sequence[AssertGroups] = (),
    *,
    max_k: int | None = None,
    solver: str | None = None,
    session: SolverSession | None = None,
    check_timeout: float | None = None,
    on_bound: Callable[[int, str], None] | None = None,
) -> BmcOutcome:
    """Iterate bounds on one incremental session.

    At each bound the open problem (can any branch still be alive at this
    depth?) is checked first; if nothing survives, no witness of any
    length exists and the search stops with ``unsat``.  Otherwise the
    acceptance condition is tried in a disposable scope; if it holds, the
    model is decoded into a witness before the scope is dropped.
    """
    limit = max_k if max_k is not None else encoding.max_k
    if limit > encoding.max_k:
        raise EncodingError("bound exceeds the encoded maximum")
    own_session = session is None
    if session is None:
        session = SolverSession(explicit=solver)
    try:
        script_parts = [render(d) for d in encoding.declarations()]
        for g in extras:
            script_parts += [render(d) for d in g.extra_declarations()]
        script_parts += [
            render(("assert", a)) for a in encoding.base_asserts()
        ]
        for g in extras:
            script_parts += [render(("assert", a)) for a in g.base_asserts()]
        session.send_script("\n".join(script_parts))
        k = 1
        while True:
            alive = session.check_sat(check_timeout)
            if alive.is_unsat:
                return BmcOutcome("unsat", k)
            if not alive.is_sat:
                raise EncodingError(f"solver returned unknown: {alive.reason}")
            session.push()
            try:
                session.execute(render(("assert", encoding.acceptance(k))))
                accepted = session.check_sat(check_timeout)
                if accepted.is_sat:
                    word = encoding.decode_witness(session, k)
                    payloads = tuple(
                        g.decode(session, k) for g in extras if hasattr(g, "decode")
                    )
                    return BmcOutcome("sat", k, word, payloads)
                if not accepted.is_unsat:
                    raise EncodingError(
                        f"solver returned unknown: {accepted.reason}"
                    )
            finally:
                session.pop()
            if on_bound is not None:
                on_bound(k, "open")
            if k >= limit:
                return BmcOutcome("budget", k)
            k += 1
            parts = [render(("assert", a)) for a in encoding.slice_asserts(k)]
            for g in extras:
                parts += [render(("assert", a)) for a in g.slice_asserts(k)]
            session.send_script("\n".join(parts))
    finally:
        if own_session:
            session.close()


def smt_sat(
    matrix: OpMatrix,
    formula: Formula,
    aps: Sequence[str] = (),
    max_k: int = 12,
    solver: str | None = None,
    check_timeout: float | None = None,
) -> BmcOutcome:
    """Bounded satisfiability of one formula via the SMT unraveling."""
    encoding = FormulaEncoding(matrix, formula, aps, max_k)
    return bmc_run(
        encoding, max_k=max_k, solver=solver, check_timeout=check_timeout
    )


def _safe(name: str) -> str:
    if name == TERM:
        return "term"
    return "".join(ch if ch.isalnum() or ch == "_" else "_" for ch in name)
