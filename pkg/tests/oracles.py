"""Independent reference implementations used to cross-check the package.

Everything here is written directly from the definitions, with no reuse of
the package's production algorithms, so agreement between the two is
meaningful evidence.
"""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

from opmc.op_alphabet import OpMatrix, Prec, TERM, symbol_at


def chain_oracle(matrix: OpMatrix, body: Sequence[str]) -> frozenset[tuple[int, int]]:
    """All chain context pairs, by direct recursion on the definition.

    A pair (i, j) is a chain when some nonempty sequence of body supports
    i < p1 < .. < pl < j satisfies yields/equals*/takes between the context
    and the supports, and each consecutive pair is either adjacent or itself
    a chain.
    """
    n = len(body) + 1

    def prec(a: int, b: int) -> Prec | None:
        return matrix.prec(symbol_at(body, a), symbol_at(body, b))

    @lru_cache(maxsize=None)
    def is_chain(i: int, j: int) -> bool:
        if not (0 <= i < j <= n):
            return False

        # search for a support sequence, left to right
        def extend(prev: int) -> bool:
            # prev is the latest support; try to close with j or continue
            if prec(prev, j) is Prec.TAKES and (j == prev + 1 or is_chain(prev, j)):
                return True
            for q in range(prev + 1, j):
                if prec(prev, q) is Prec.EQUALS and (q == prev + 1 or is_chain(prev, q)):
                    if extend(q):
                        return True
            return False

        for p in range(i + 1, j):
            if prec(i, p) is Prec.YIELDS and (p == i + 1 or is_chain(i, p)):
                if extend(p):
                    return True
        return False

    return frozenset(
        (i, j) for i in range(0, n) for j in range(i + 1, n + 1) if is_chain(i, j)
    )
