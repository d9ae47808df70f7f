"""Test oracles: truth tables, random functions and reference searches."""
from __future__ import annotations

import itertools

import numpy as np

from extbdd import core, ops

#: verdict lines of the acceptance criteria, echoed in the terminal summary
VERDICTS: list[str] = []


def all_assignments(n: int) -> np.ndarray:
    """(2**n, n) boolean matrix; row r assigns bit k of r to variable k."""
    r = np.arange(1 << n)
    return ((r[:, None] >> np.arange(n)[None, :]) & 1).astype(bool)


def truth_table(h, n: int) -> np.ndarray:
    """Evaluate a handle on all 2**n assignments by walking its nodes in memory."""
    if h.is_leaf:
        return np.full(1 << n, h.leaf_value)
    rows = h.file.reader().read_all()
    table = {int(u): (int(lo), int(hi)) for u, lo, hi in rows}
    asg = all_assignments(n)
    cur = np.full(1 << n, h.file.root(), dtype=np.uint64)
    for _ in range(len(h.file.meta.levels)):
        internal = (cur & np.uint64(core.LEAF_BIT)) == 0
        if not internal.any():
            break
        for u in np.unique(cur[internal]):
            sel = cur == u
            lo, hi = table[int(u)]
            lab = core.label_of(int(u))
            cur[sel] = np.where(asg[sel, lab], np.uint64(hi), np.uint64(lo))
    vals = ((cur >> np.uint64(1)) & np.uint64(1)).astype(bool)
    return vals ^ h.negated


def from_table(tt: np.ndarray, n: int, vars=None):
    """Build the BDD of a truth table by Shannon expansion (no Apply involved)."""
    vars = list(range(n)) if vars is None else vars
    nodes = {}

    # variable 0 is the most significant bit
    perm = np.zeros(1 << n, dtype=np.int64)
    r = np.arange(1 << n)
    for k in range(n):
        perm |= ((r >> (n - 1 - k)) & 1) << k
    msb_tt = tt[perm]

    def expand(lo: int, size: int, depth: int):
        block = msb_tt[lo:lo + size]
        if block.all():
            return True
        if not block.any():
            return False
        key = (depth, lo, size)
        half = size // 2
        a = expand(lo, half, depth + 1)
        b = expand(lo + half, half, depth + 1)
        nodes[key] = (vars[depth], a, b)
        return key

    root = expand(0, 1 << n, 0)
    return ops.build(root, nodes)


def random_table(rng: np.random.Generator, n: int, density: float | None = None) -> np.ndarray:
    p = rng.uniform(0.1, 0.9) if density is None else density
    return rng.random(1 << n) < p


def random_structured(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random small formula evaluated as a truth table (sparser structure)."""
    asg = all_assignments(n)

    def gen(depth):
        if depth == 0 or rng.random() < 0.25:
            v = asg[:, rng.integers(n)]
            return ~v if rng.random() < 0.5 else v
        a, b = gen(depth - 1), gen(depth - 1)
        k = rng.integers(3)
        return a & b if k == 0 else (a | b if k == 1 else a ^ b)

    return gen(4)


def queens_backtrack(n: int) -> int:
    """Number of ways to place n non-attacking queens (plain backtracking)."""
    count = 0
    cols, d1, d2 = set(), set(), set()

    def place(r):
        nonlocal count
        if r == n:
            count += 1
            return
        for c in range(n):
            if c in cols or r - c in d1 or r + c in d2:
                continue
            cols.add(c); d1.add(r - c); d2.add(r + c)
            place(r + 1)
            cols.remove(c); d1.remove(r - c); d2.remove(r + c)

    place(0)
    return count


def lpq_trace(store, k: int, nops: int, seed: int, nlevels: int | None = None,
              memory_bytes: int = 1 << 16, block_bytes: int = 4096):
    """Drive a LevelizedPQ and a reference heap with the same random trace.

    Returns the two pop sequences.  Keys are two columns with many ties;
    a payload column records the push order so stability is checked too.
    """
    import heapq

    from extbdd.extmem import LevelizedPQ

    rng = np.random.default_rng(seed)
    if nlevels is None:
        nlevels = max(40, nops // 25)
    levels = sorted(rng.choice(10 * nlevels, size=nlevels, replace=False).tolist())
    q = LevelizedPQ(store, levels, width=3, nkeys=2, memory_bytes=memory_bytes, k=k,
                    block_bytes=block_bytes)
    ref: list = []
    got: list = []
    want: list = []
    cur = -1          # index into levels of the current level
    seq = 0
    try:
        for _ in range(nops):
            r = rng.random()
            if r < 0.55 and cur < nlevels - 1:
                # push a small batch, mostly near the current level
                n = int(rng.integers(1, 4))
                span = nlevels - 1 - cur
                d = np.minimum(rng.geometric(0.3, size=n), span)
                if rng.random() < 0.2:
                    d = rng.integers(1, span + 1, size=n)
                pos = cur + d
                rows = np.empty((n, 3), dtype=np.uint64)
                rows[:, 0] = rng.integers(0, 5, size=n)
                rows[:, 1] = rng.integers(0, 3, size=n)
                rows[:, 2] = np.arange(seq, seq + n)
                for p, row in zip(pos.tolist(), rows.tolist()):
                    heapq.heappush(ref, (p, row[0], row[1], row[2]))
                seq += n
                q.push(rows, [levels[p] for p in pos.tolist()])
            elif q.has_current():
                got.append((q.current_label,) + q.pop())
                p, a, b, s = heapq.heappop(ref)
                want.append((levels[p], a, b, s))
            else:
                lab = q.setup_next_level()
                if lab is None:
                    assert not ref
                    continue
                cur = levels.index(lab)
                assert ref[0][0] == cur
        while True:
            while q.has_current():
                got.append((q.current_label,) + q.pop())
                p, a, b, s = heapq.heappop(ref)
                want.append((levels[p], a, b, s))
            if q.setup_next_level() is None:
                break
        assert not ref
    finally:
        q.close()
    return got, want


def cube_lines() -> list[tuple[int, ...]]:
    """All winning lines of 4x4x4 Tic-Tac-Toe, enumerated independently."""
    cells = [(i, j, k) for i in range(4) for j in range(4) for k in range(4)]
    found = set()
    for a in cells:
        for b in cells:
            if b <= a:
                continue
            d = tuple(bb - aa for aa, bb in zip(a, b))
            if any(abs(c) > 1 for c in d):
                continue
            pts = [tuple(a[t] + s * d[t] for t in range(3)) for s in range(4)]
            if all(0 <= c < 4 for p in pts for c in p):
                found.add(tuple(sorted(16 * p[0] + 4 * p[1] + p[2] for p in pts)))
    return sorted(found)


def tictactoe_bruteforce(n: int, variables: int = 76, chunk: int = 200_000) -> int:
    """Count placements of n crosses over ``variables`` cells that leave every
    line with at least one cross and one naught."""
    lines = np.array(cube_lines())
    member = np.zeros((variables, len(lines)), dtype=np.int8)
    for li, ln in enumerate(lines):
        member[ln, li] = 1
    total = 0
    combos = itertools.combinations(range(variables), n)
    while True:
        block = list(itertools.islice(combos, chunk))
        if not block:
            break
        idx = np.array(block, dtype=np.int64).reshape(len(block), n)
        crosses = member[idx].sum(axis=1) if n else np.zeros((len(block), len(lines)))
        ok = ((crosses > 0) & (crosses < 4)).all(axis=1)
        total += int(ok.sum())
    return total
