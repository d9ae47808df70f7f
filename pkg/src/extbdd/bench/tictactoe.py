"""Draws of 4x4x4 Tic-Tac-Toe with exactly N crosses.

Cell (i, j, k) is variable 16i + 4j + k.  A draw has, on each of the 76
lines through the cube, at least one cross and at least one naught.  The
initial BDD says that exactly N of the ``variables`` are true; by default
that domain is 76 variables wide, so the 12 variables past the last cell are
unconstrained padding (pass ``variables=64`` for the cube alone).
"""
from __future__ import annotations

import itertools

from .. import ops
from ..errors import PreconditionError
from ..manager import current
from .stats import RunStats, StatsCollector

CELLS = 64
DEFAULT_VARIABLES = 76


def _cell(i: int, j: int, k: int) -> int:
    return 16 * i + 4 * j + k


def lines() -> list[tuple[int, int, int, int]]:
    """The 76 winning lines as ascending variable tuples, by increasing span.

    Lines with equal span keep the order of their smallest tuple.
    """
    found = set()
    for d in itertools.product((-1, 0, 1), repeat=3):
        if d == (0, 0, 0):
            continue
        for s in itertools.product(range(4), repeat=3):
            pts = [tuple(s[a] + t * d[a] for a in range(3)) for t in range(4)]
            if all(0 <= c < 4 for p in pts for c in p):
                found.add(tuple(sorted(_cell(*p) for p in pts)))
    out = sorted(found)
    out.sort(key=lambda ln: ln[-1] - ln[0])
    return out


def line_bdd(ln):
    """Not all four variables of the line are equal."""
    a, b, c, d = ln
    # after seeing value v, a differing value satisfies the constraint
    nodes = {("a",): (a, ("b", False), ("b", True))}
    nodes[("b", False)] = (b, ("c", False), True)
    nodes[("b", True)] = (b, True, ("c", True))
    nodes[("c", False)] = (c, ("d", False), True)
    nodes[("c", True)] = (c, True, ("d", True))
    nodes[("d", False)] = (d, False, True)
    nodes[("d", True)] = (d, True, False)
    return ops.build(("a",), nodes)


def tictactoe(n: int, prune: bool = True, variables: int = DEFAULT_VARIABLES) -> tuple[int, RunStats]:
    """Number of draws with exactly ``n`` crosses and the run statistics."""
    if variables < CELLS:
        raise PreconditionError(f"need at least {CELLS} variables, got {variables}")
    if not 0 <= n <= variables:
        raise PreconditionError(f"N={n} outside 0..{variables}")
    mgr = current()
    with StatsCollector(mgr, "tictactoe", n) as st:
        acc = ops.bdd_counter(0, variables - 1, n)
        for ln in lines():
            c = line_bdd(ln)
            nxt = ops.bdd_and(acc, c, prune=prune)
            acc.release()
            c.release()
            acc = nxt
        count = ops.bdd_satcount(acc, variables)
        acc.release()
    st.result = count
    return count, st
