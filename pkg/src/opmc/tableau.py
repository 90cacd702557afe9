"""Explicit tree-shaped tableau for satisfiability of the logic.

A branch is a sequence of step nodes.  Each node carries a set of
formulas (the content of the upcoming word position), a symbol context,
and back-links into the branch: ``stack`` points at the push node whose
frame is open, ``ctx`` at the node of the position serving as left chain
context.  The relation between the symbol context and the node's unique
structural symbol types the node: push opens a frame, shift replaces the
top symbol, pop closes a frame without consuming a position.

Expansion rewrites until and release obligations into local choices plus
next-style obligations, step rules thread those obligations to successor
nodes, guess rules inject arguments that later checks require, and
rejection rules prune branches whose obligations can no longer be met.
A branch accepts when it reaches the delimiter with an empty stack.

The engine searches branches depth first under an iteratively deepened
node budget, so the first accepted branch has the fewest step nodes.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

from .op_alphabet import OpMatrix, Prec, TERM
from .potl import (
    And,
    Atom,
    ChainNext,
    Dir,
    Eventually,
    FalseConst,
    Formula,
    Globally,
    HNext,
    HRelease,
    HUntil,
    Next,
    Not,
    OpWord,
    Or,
    Release,
    TrueConst,
    Until,
    WChainNext,
    WHNext,
    WNext,
    Zeta,
    nnf,
    pretty,
)

PUSH = "push"
SHIFT = "shift"
POP = "pop"

_DOWN_OK = (Prec.YIELDS, Prec.EQUALS)
_UP_OK = (Prec.TAKES, Prec.EQUALS)


def _key(f: Formula) -> tuple[str, str]:
    return (pretty(f), repr(f))


@dataclass(frozen=True)
class Node:
    """One step node; ``stack`` and ``ctx`` index the branch, None is bottom."""

    gamma: frozenset[Formula]
    smb: str
    stack: int | None
    ctx: int | None
    kind: str | None


@dataclass(frozen=True)
class TableauResult:
    satisfiable: bool | None  #: None when the node budget ran out
    branch: tuple[Node, ...] | None
    witness: OpWord | None
    nodes_explored: int


class Tableau:
    """Satisfiability search for one formula over one matrix."""

    def __init__(
        self,
        matrix: OpMatrix,
        formula: Formula,
        aps: Sequence[str] = (),
        max_nodes: int = 40,
    ):
        matrix.check_complete()
        self.matrix = matrix
        self.aps = tuple(aps)
        self.max_nodes = max_nodes
        self.inject: Formula | None = None
        if isinstance(formula, Globally):
            self.inject = nnf(formula.arg)
            self.seed: frozenset[Formula] = frozenset()
        else:
            self.seed = frozenset([nnf(formula)])
        self._structural = set(matrix.symbols) | {TERM}

    # -- content handling ----------------------------------------------

    def _struct(self, gamma: Iterable[Formula]) -> str | None:
        found = None
        for f in gamma:
            if isinstance(f, Atom) and f.name in self._structural:
                found = f.name
        return found

    def _is_ap(self, f: Formula) -> bool:
        return isinstance(f, Atom) and f.name not in self._structural

    def _is_strong(self, f: Formula) -> bool:
        """Positive literals and strong next-style obligations clash with #."""
        if isinstance(f, Atom):
            return f.name != TERM
        return isinstance(f, (Next, ChainNext, HNext, Zeta, Eventually))

    def saturate(
        self,
        carried: frozenset[Formula],
        new: Sequence[Formula],
        keep: frozenset[Formula] = frozenset(),
    ) -> list[frozenset[Formula]]:
        """Expand the new formulas over the carried content.

        Returns the reachable fully expanded content sets in a fixed
        order.  States with a literal contradiction, an explicit
        falsehood, or two structural symbols are dropped.  Formulas in
        ``keep`` stay in the content besides being expanded; formulas in
        ``carried`` are part of the content and are not expanded again.
        When a state ends up without a structural symbol, one child per
        alphabet symbol plus one for the delimiter is created, and the
        non-delimiter children receive the globally injected formula.
        """
        results: list[frozenset[Formula]] = []
        seen: set[frozenset[Formula]] = set()

        def contradiction(done: set[Formula], f: Formula) -> bool:
            if isinstance(f, FalseConst):
                return True
            if isinstance(f, Not):
                return f.arg in done
            return Not(f) in done

        def symbols_in(done: set[Formula]) -> set[str]:
            return {
                f.name
                for f in done
                if isinstance(f, Atom) and f.name in self._structural
            }

        def run(done: set[Formula], todo: list[Formula], injected: bool) -> None:
            while todo:
                f = todo.pop(0)
                if f in done:
                    continue
                if contradiction(done, f):
                    return
                if f in keep:
                    done.add(f)
                if isinstance(f, TrueConst):
                    continue
                if isinstance(f, And):
                    todo = [f.left, f.right] + todo
                    continue
                if isinstance(f, Or):
                    run(done.copy(), [f.left] + todo, injected)
                    run(done.copy(), [f.right] + todo, injected)
                    return
                if isinstance(f, Until):
                    run(done.copy(), [f.right] + todo, injected)
                    run(done.copy(), [f.left, Next(f.dir, f)] + todo, injected)
                    run(done.copy(), [f.left, ChainNext(f.dir, f)] + todo, injected)
                    return
                if isinstance(f, Release):
                    run(done.copy(), [f.left, f.right] + todo, injected)
                    run(
                        done.copy(),
                        [f.right, WNext(f.dir, f), WChainNext(f.dir, f)] + todo,
                        injected,
                    )
                    return
                if isinstance(f, HUntil):
                    run(done.copy(), [f.right, Zeta(f.dir)] + todo, injected)
                    run(done.copy(), [f.left, HNext(f.dir, f)] + todo, injected)
                    return
                if isinstance(f, HRelease):
                    non_member = Not(Zeta(f.dir))
                    carry_on = WHNext(f.dir, f)
                    run(done.copy(), [f.left, f.right] + todo, injected)
                    run(done.copy(), [f.left, non_member] + todo, injected)
                    run(done.copy(), [f.right, carry_on] + todo, injected)
                    run(done.copy(), [non_member, carry_on] + todo, injected)
                    return
                if isinstance(f, Globally):
                    # vacuous at the delimiter, else hold now and at the next
                    # position in whichever direction the step takes
                    run(done.copy(), [Atom(TERM)] + todo, injected)
                    run(
                        done.copy(),
                        [f.arg, WNext(Dir.DOWN, f), WNext(Dir.UP, f)] + todo,
                        injected,
                    )
                    return
                if isinstance(f, Eventually):
                    not_term = Not(Atom(TERM))
                    run(done.copy(), [not_term, f.arg] + todo, injected)
                    run(done.copy(), [Next(Dir.DOWN, f)] + todo, injected)
                    run(done.copy(), [Next(Dir.UP, f)] + todo, injected)
                    return
                done.add(f)
                if len(symbols_in(done)) > 1:
                    return
            syms = symbols_in(done)
            if not syms:
                for a in self.matrix.symbols:
                    extra: list[Formula] = [Atom(a)]
                    if self.inject is not None:
                        extra.append(self.inject)
                    run(done.copy(), extra, True)
                run(done.copy(), [Atom(TERM)], injected)
                return
            if self.inject is not None and TERM not in syms and not injected:
                run(done, [self.inject], True)
                return
            gamma = frozenset(done)
            if gamma not in seen:
                seen.add(gamma)
                results.append(gamma)

        run(set(carried), sorted(new, key=_key), self.inject is None)
        return results

    # -- search --------------------------------------------------------

    def check(self) -> TableauResult:
        """Search for an accepting branch, smallest node count first."""
        explored = 0
        for budget in range(1, self.max_nodes + 1):
            self._cutoff = False
            self._explored = 0
            branch = self._start(budget)
            explored += self._explored
            if branch is not None:
                return TableauResult(
                    True, tuple(branch), self._witness(branch), explored
                )
            if not self._cutoff:
                return TableauResult(False, None, None, explored)
        return TableauResult(None, None, None, explored)

    def _start(self, budget: int) -> list[Node] | None:
        for gamma in self.saturate(frozenset(), sorted(self.seed, key=_key)):
            node = self._make_node(gamma, TERM, None, None, [])
            if node is None:
                continue
            found = self._dfs([node], budget)
            if found is not None:
                return found
        return None

    def _witness(self, branch: Sequence[Node]) -> OpWord:
        entries = []
        for node in branch:
            if node.kind in (PUSH, SHIFT):
                sym = self._struct(node.gamma)
                assert sym is not None and sym != TERM
                props = frozenset(f.name for f in node.gamma if self._is_ap(f))
                entries.append((sym, props))
        return OpWord(self.matrix, tuple(entries))

    def _gamma(self, branch: Sequence[Node], idx: int | None) -> frozenset[Formula]:
        return frozenset() if idx is None else branch[idx].gamma

    def _dfs(self, branch: list[Node], budget: int) -> list[Node] | None:
        self._explored += 1
        node = branch[-1]
        if node.kind is None:
            if node.stack is None and Atom(TERM) in node.gamma:
                return list(branch)
            return None
        if len(branch) >= budget:
            self._cutoff = True
            return None
        if node.kind == POP:
            children = self._pop_children(branch)
        else:
            children = self._step_children(branch)
        for child in children:
            branch.append(child)
            found = self._dfs(branch, budget)
            if found is not None:
                return found
            branch.pop()
        return None

    # -- successors ----------------------------------------------------

    def _pool(
        self,
        gamma: frozenset[Formula],
        spec: Sequence[tuple[type, Dir | None]],
    ) -> list[Formula]:
        out = []
        for f in sorted(gamma, key=_key):
            for cls, d in spec:
                if isinstance(f, cls) and (d is None or f.dir is d):
                    out.append(f.arg)
                    break
        return out

    def _subsets(self, pool: Sequence[Formula]) -> Iterator[tuple[Formula, ...]]:
        unique = sorted(set(pool), key=_key)
        for r in range(len(unique) + 1):
            yield from itertools.combinations(unique, r)

    def _step_children(self, branch: list[Node]) -> Iterator[Node]:
        """Successors of a push or shift node."""
        node = branch[-1]
        idx = len(branch) - 1
        seed = self._pool(node.gamma, [(Next, None)])
        pool = self._pool(
            node.gamma,
            [(WNext, None), (HNext, Dir.DOWN), (WHNext, Dir.DOWN)],
        )
        smb = self._struct(node.gamma)
        assert smb is not None
        if node.kind == PUSH:
            stack: int | None = idx
            if node.stack is None:
                ctx: int | None = None
            elif branch[idx - 1].kind in (PUSH, SHIFT):
                ctx = idx - 1
            else:
                ctx = branch[idx - 1].ctx
        else:
            stack = node.stack
            ctx = node.ctx
        for guess in self._subsets(pool):
            kept = frozenset(guess)
            for gamma in self.saturate(frozenset(), seed + list(guess), kept):
                child = self._make_node(gamma, smb, stack, ctx, branch)
                if child is not None:
                    yield child

    def _pop_children(self, branch: list[Node]) -> Iterator[Node]:
        """Successors of a pop node: content is carried, state is restored."""
        node = branch[-1]
        assert node.stack is not None
        parent = branch[node.stack]
        pool: list[Formula] = []
        if node.ctx is not None:
            pool += self._pool(
                branch[node.ctx].gamma,
                [
                    (ChainNext, None),
                    (WChainNext, None),
                    (HNext, Dir.DOWN),
                    (WHNext, Dir.DOWN),
                ],
            )
        pool += self._pool(
            branch[node.stack].gamma, [(HNext, Dir.UP), (WHNext, Dir.UP)]
        )
        for guess in self._subsets(pool):
            kept = frozenset(guess)
            for gamma in self.saturate(node.gamma, list(guess), kept):
                child = self._make_node(
                    gamma, parent.smb, parent.stack, parent.ctx, branch
                )
                if child is not None:
                    yield child

    # -- node validation -----------------------------------------------

    def _make_node(
        self,
        gamma: frozenset[Formula],
        smb: str,
        stack: int | None,
        ctx: int | None,
        branch: list[Node],
    ) -> Node | None:
        symbols = {
            f.name for f in gamma if isinstance(f, Atom) and f.name in self._structural
        }
        if len(symbols) != 1:
            return None  # two structural symbols contradict each other
        struct = next(iter(symbols))
        if struct == TERM and any(
            self._is_strong(f) for f in gamma if f != Atom(TERM)
        ):
            return None  # strong obligations cannot be met at the delimiter
        rel = self.matrix.prec(smb, struct)
        kind = {Prec.YIELDS: PUSH, Prec.EQUALS: SHIFT, Prec.TAKES: POP}.get(rel)
        if rel is None and not (smb == TERM and struct == TERM):
            return None  # stuck on an undefined relation
        node = Node(gamma, smb, stack, ctx, kind)
        if not branch:
            # position one is never in an up family
            if Zeta(Dir.UP) in gamma or any(
                isinstance(f, HNext) and f.dir is Dir.UP for f in gamma
            ):
                return None
            return node
        return node if self._admit(branch, node) else None

    def _admit(self, branch: list[Node], node: Node) -> bool:
        """All step-sensitive rejection rules, new node against the branch."""
        prev = branch[-1]
        prev_idx = len(branch) - 1
        gamma = node.gamma

        if prev.kind in (PUSH, SHIFT):
            rel = self.matrix.prec(self._struct(prev.gamma), self._struct(gamma))
            # a strong next obligation with an incompatible relation
            if rel is Prec.TAKES and any(
                isinstance(f, Next) and f.dir is Dir.DOWN for f in prev.gamma
            ):
                return False
            if rel is Prec.YIELDS and any(
                isinstance(f, Next) and f.dir is Dir.UP for f in prev.gamma
            ):
                return False
            # weak next arguments must be delivered when the relation fits
            for f in prev.gamma:
                if isinstance(f, WNext):
                    ok = _DOWN_OK if f.dir is Dir.DOWN else _UP_OK
                    if rel in ok and f.arg not in gamma:
                        return False
            # down-family claims require the next move to open a frame
            if node.kind in (POP, SHIFT):
                if any(
                    isinstance(f, HNext) and f.dir is Dir.DOWN for f in prev.gamma
                ):
                    return False
                if Zeta(Dir.DOWN) in prev.gamma:
                    return False

        if prev.kind == POP:
            close = self._close_rel(branch, prev_idx)
            ctx_gamma = self._gamma(branch, prev.ctx)
            # weak chain next arguments deliver at the landing position
            for f in ctx_gamma:
                if isinstance(f, WChainNext):
                    ok = _DOWN_OK if f.dir is Dir.DOWN else _UP_OK
                    if close in ok and f.arg not in gamma:
                        return False
            # chain next obligations of buried frames must have been met
            if not self._chain_fulfilled(branch, node):
                return False

        if node.kind == POP:
            close = self._close_rel_of(branch, node)
            ctx_gamma = self._gamma(branch, node.ctx)
            stack_gamma = self._gamma(branch, node.stack)
            # an up-family obligation survives only a yields-closing pop
            if close is not Prec.YIELDS and any(
                isinstance(f, HNext) and f.dir is Dir.UP for f in stack_gamma
            ):
                return False
            if close is Prec.EQUALS:
                # an equals close ends the chain life of the context
                if any(
                    isinstance(f, HNext) and f.dir is Dir.DOWN for f in ctx_gamma
                ):
                    return False
                if Zeta(Dir.DOWN) in ctx_gamma:
                    return False
            if close is Prec.TAKES:
                if Not(Zeta(Dir.DOWN)) in ctx_gamma:
                    return False  # a takes close proves down membership
                if prev.kind in (PUSH, SHIFT):
                    # the deepest family member has no successor
                    if any(
                        isinstance(f, HNext) and f.dir is Dir.DOWN
                        for f in ctx_gamma
                    ):
                        return False
                if prev.kind == POP:
                    target = self._gamma(branch, prev.ctx)
                    for f in ctx_gamma:
                        if isinstance(f, (HNext, WHNext)) and f.dir is Dir.DOWN:
                            if f.arg not in target:
                                return False

        if node.kind == PUSH:
            after_yield_close = (
                prev.kind == POP
                and self._close_rel(branch, prev_idx) is Prec.YIELDS
            )
            if Zeta(Dir.UP) in gamma and not after_yield_close:
                return False
            if after_yield_close and Not(Zeta(Dir.UP)) in gamma:
                return False
            if prev.kind == POP:
                for f in self._gamma(branch, prev.stack):
                    if isinstance(f, HNext) and f.dir is Dir.UP:
                        if f.arg not in gamma:
                            return False
                    if isinstance(f, WHNext) and f.dir is Dir.UP:
                        if self._is_member_node(branch, prev.stack):
                            if f.arg not in gamma:
                                return False
            elif any(isinstance(f, HNext) and f.dir is Dir.UP for f in gamma):
                return False  # a push not after a pop starts no up family

        if node.kind == SHIFT:
            if any(isinstance(f, HNext) and f.dir is Dir.UP for f in gamma):
                return False
            if Zeta(Dir.UP) in gamma:
                return False

        if node.kind in (PUSH, SHIFT) and self._has_pending_twin(branch, node):
            return False
        return True

    def _close_rel(self, branch: Sequence[Node], idx: int) -> Prec | None:
        """The context relation of the chain closed by a pop node."""
        return self._close_rel_of(branch, branch[idx])

    def _close_rel_of(self, branch: Sequence[Node], node: Node) -> Prec | None:
        assert node.stack is not None
        below = branch[node.stack].smb
        return self.matrix.prec(below, self._struct(node.gamma))

    def _is_member_node(self, branch: Sequence[Node], idx: int | None) -> bool:
        """Whether a node consumed its position right after a yields close."""
        if idx is None or idx == 0:
            return False
        node = branch[idx]
        if node.kind != PUSH or branch[idx - 1].kind != POP:
            return False
        return self._close_rel(branch, idx - 1) is Prec.YIELDS

    def _chain_fulfilled(self, branch: list[Node], new: Node) -> bool:
        """Chain next obligations of the nodes buried by the last pop."""
        pop_idx = len(branch) - 1
        pop_node = branch[pop_idx]
        assert pop_node.stack is not None
        buried = [pop_node.stack] + [
            j
            for j in range(len(branch))
            if branch[j].kind == SHIFT and branch[j].stack == pop_node.stack
        ]
        for uprime in buried:
            source = branch[uprime].gamma
            sym = self._struct(source)
            for f in source:
                if not isinstance(f, ChainNext):
                    continue
                ok = _DOWN_OK if f.dir is Dir.DOWN else _UP_OK
                fulfilled = False
                for j in range(len(branch)):
                    if branch[j].kind != POP or branch[j].ctx != uprime:
                        continue
                    if self.matrix.prec(sym, self._struct(branch[j].gamma)) not in ok:
                        continue
                    target = (
                        branch[j + 1].gamma if j + 1 < len(branch) else new.gamma
                    )
                    if f.arg in target:
                        fulfilled = True
                        break
                if not fulfilled:
                    return False
        return True

    def _has_pending_twin(self, branch: list[Node], node: Node) -> bool:
        """An equivalent pending ancestor makes the new node redundant."""

        def popped(idx: int) -> bool:
            return any(
                branch[j].kind == POP and branch[j].stack == idx
                for j in range(idx + 1, len(branch))
            )

        def same_content(a: int | None, b: int | None) -> bool:
            if (a is None) != (b is None):
                return False
            return a is None or branch[a].gamma == self._gamma(branch, b)

        for idx, anc in enumerate(branch):
            if anc.kind == PUSH:
                pending = not popped(idx)
            elif anc.kind == SHIFT:
                pending = anc.stack is not None and not popped(anc.stack)
            else:
                continue
            if (
                pending
                and anc.gamma == node.gamma
                and anc.smb == node.smb
                and same_content(anc.stack, node.stack)
                and same_content(anc.ctx, node.ctx)
            ):
                return True
        return False


def tableau_sat(
    matrix: OpMatrix,
    formula: Formula,
    aps: Sequence[str] = (),
    max_nodes: int = 40,
) -> TableauResult:
    """Satisfiability of a formula via the explicit tableau."""
    return Tableau(matrix, formula, aps, max_nodes).check()
