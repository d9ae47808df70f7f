"""N-Queens: count placements of N mutually non-threatening queens.

Variable x_ij (queen on row i, column j) has index i*N + j.  The formula is
the conjunction over rows of the disjunction over columns of
``x_ij and not has_threat(i, j)``; each of those base cases is a single chain
written directly without any BDD operation.
"""
from __future__ import annotations

from .. import ops
from ..errors import PreconditionError
from ..manager import current
from .stats import RunStats, StatsCollector

MAX_N = 27


def _threatens(n: int, i: int, j: int, k: int, l: int) -> bool:
    return (k, l) != (i, j) and (k == i or l == j or k - l == i - j or k + l == i + j)


def queens_base(n: int, i: int, j: int):
    """x_ij and no queen on any square attacking (i, j)."""
    me = i * n + j
    nodes = {}
    nxt: object = True
    for v in reversed(range(n * n)):
        k, l = divmod(v, n)
        if v == me:
            nodes[v] = (v, False, nxt)
        elif _threatens(n, i, j, k, l):
            nodes[v] = (v, nxt, False)
        else:
            continue
        nxt = v
    return ops.build(nxt, nodes)


def _row(n: int, i: int, prune: bool):
    out = queens_base(n, i, 0)
    for j in range(1, n):
        s = queens_base(n, i, j)
        nxt = ops.bdd_or(out, s, prune=prune)
        out.release()
        s.release()
        out = nxt
    return out


def queens(n: int, prune: bool = True) -> tuple[int, RunStats]:
    """Number of solutions and the run statistics."""
    if not 1 <= n <= MAX_N:
        raise PreconditionError(f"N={n} outside 1..{MAX_N}")
    mgr = current()
    with StatsCollector(mgr, "queens", n) as st:
        acc = _row(n, 0, prune)
        for i in range(1, n):
            r = _row(n, i, prune)
            nxt = ops.bdd_and(acc, r, prune=prune)
            acc.release()
            r.release()
            acc = nxt
        count = ops.bdd_satcount(acc, n * n)
        acc.release()
    st.result = count
    return count, st
