"""Top-down product construction (Apply).

The sweep runs one level at a time.  All requests whose smaller target sits
on the current level are taken out of a levelized priority queue (sorted by
``(min(tf, tg), tf, tg)`` and insertion order), the level's nodes of both
inputs are read, and a compiled kernel resolves the requests in exactly the
order of the classic two-queue formulation: requests for pairs of distinct
nodes on the same level are parked in a second queue keyed by the larger
target and resolved when the sweep reaches it.  Fresh identifiers on each
level follow that resolution order.

Output is the semi-transposed unreduced diagram: arcs between internal nodes
sorted by target, arcs into leaves in source order.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from numba import njit

from . import core
from .core import NIL, NodeRecord
from .errors import IntegrityError
from .extmem import LevelizedPQ
from .operators import BooleanOperator
from .streams import ArcFiles, ArcWriter, LevelCursor, NodeFile

logger = logging.getLogger(__name__)

_LEAF = np.uint64(core.LEAF_BIT)
_NIL = np.uint64(NIL)
_ONE = np.uint64(1)
_ZERO = np.uint64(0)
_LSHIFT = np.uint64(core.LABEL_SHIFT)
_LMASK = np.uint64(core.MAX_LABEL)


@njit(cache=True, inline="always")
def _is_leaf(u):
    return (u & _LEAF) != _ZERO


@njit(cache=True, inline="always")
def _label(u):
    return (u >> _LSHIFT) & _LMASK


@njit(cache=True, inline="always")
def _op_leaf(op, a, b):
    va = (a >> _ONE) & _ONE
    vb = (b >> _ONE) & _ONE
    r = op[np.int64(va) * 2 + np.int64(vb)]
    return _LEAF | (np.uint64(r) << _ONE)


@njit(cache=True, inline="always")
def _forced(op, a, b, prune):
    """Collapse a child request (a, b) to a leaf if possible.

    Returns (leaf, True) when the pair is decided, else (0, False).
    """
    al = _is_leaf(a)
    bl = _is_leaf(b)
    if al and bl:
        return _op_leaf(op, a, b), True
    if prune:
        if al:
            va = np.int64((a >> _ONE) & _ONE)
            if op[2 * va] == op[2 * va + 1]:
                return _LEAF | (np.uint64(op[2 * va]) << _ONE), True
        if bl:
            vb = np.int64((b >> _ONE) & _ONE)
            if op[vb] == op[2 + vb]:
                return _LEAF | (np.uint64(op[vb]) << _ONE), True
    return _ZERO, False


@njit(cache=True)
def _requests_for(tf, tg, vf_uid, vf_low, vf_high, vg_uid, vg_low, vg_high,
                  low, high, op, prune):
    """Children requests of the pair (tf, tg); see :func:`requests_for`.

    Returns ``(l0, l1, l_is_leaf, h0, h1, h_is_leaf)``; a collapsed request
    has its leaf in slot 0.
    """
    fl = _is_leaf(tf)
    gl = _is_leaf(tg)
    if gl or (not fl and _label(tf) < _label(tg)):
        l0, l1, h0, h1 = vf_low, tg, vf_high, tg
    elif fl or _label(tf) > _label(tg):
        l0, l1, h0, h1 = tf, vg_low, tf, vg_high
    elif tf == vf_uid and tg == vg_uid:
        l0, l1, h0, h1 = vf_low, vg_low, vf_high, vg_high
    elif tf == vf_uid:
        l0, l1, h0, h1 = vf_low, low, vf_high, high
    else:
        l0, l1, h0, h1 = low, vg_low, high, vg_high
    lv, lleaf = _forced(op, l0, l1, prune)
    hv, hleaf = _forced(op, h0, h1, prune)
    if lleaf:
        l0, l1 = lv, _NIL
    if hleaf:
        h0, h1 = hv, _NIL
    return l0, l1, lleaf, h0, h1, hleaf


@njit(cache=True, inline="always")
def _hless(hk, i, j):
    for c in range(4):
        if hk[i, c] != hk[j, c]:
            return hk[i, c] < hk[j, c]
    return False


@njit(cache=True, inline="always")
def _hswap(hk, hp, i, j):
    for c in range(4):
        t = hk[i, c]
        hk[i, c] = hk[j, c]
        hk[j, c] = t
    for c in range(3):
        t = hp[i, c]
        hp[i, c] = hp[j, c]
        hp[j, c] = t


@njit(cache=True)
def _hpush(hk, hp, n, k0, k1, k2, k3, p0, p1, p2):
    hk[n, 0] = k0
    hk[n, 1] = k1
    hk[n, 2] = k2
    hk[n, 3] = k3
    hp[n, 0] = p0
    hp[n, 1] = p1
    hp[n, 2] = p2
    i = n
    while i > 0:
        parent = (i - 1) >> 1
        if _hless(hk, i, parent):
            _hswap(hk, hp, i, parent)
            i = parent
        else:
            break
    return n + 1


@njit(cache=True)
def _hpop(hk, hp, n):
    """Remove the minimum (moved to slot n-1 first); returns the new size."""
    n -= 1
    _hswap(hk, hp, 0, n)
    i = 0
    while True:
        l = 2 * i + 1
        if l >= n:
            break
        m = l
        if l + 1 < n and _hless(hk, l + 1, l):
            m = l + 1
        if _hless(hk, m, i):
            _hswap(hk, hp, m, i)
            i = m
        else:
            break
    return n


@njit(cache=True)
def _find(uids, u):
    i = np.searchsorted(uids, u)
    if i >= uids.shape[0] or uids[i] != u:
        return -1
    return i


@njit(cache=True)
def apply_level(label, req, fu, flo, fhi, gu, glo, ghi, op, prune):
    """Resolve one level of requests.

    ``req`` rows are ``[min, tf, tg, source]`` sorted by (min, tf, tg, order
    of insertion).  Returns the new requests (same layout, unsorted), the
    internal arcs ``(source, target)``, the leaf arcs and the number of nodes
    created, plus the number of requests moved to the second queue.
    """
    n = req.shape[0]
    nreq = np.empty((2 * n, 4), dtype=np.uint64)
    isrc = np.empty(n, dtype=np.uint64)
    itgt = np.empty(n, dtype=np.uint64)
    lsrc = np.empty(2 * n, dtype=np.uint64)
    ltgt = np.empty(2 * n, dtype=np.uint64)
    hk = np.empty((n, 4), dtype=np.uint64)
    hp = np.empty((n, 3), dtype=np.uint64)
    hn = 0
    nr = 0
    ni = 0
    nl = 0
    moved = 0
    seq2 = _ZERO
    ident = -1
    base = np.uint64(label) << _LSHIFT
    p = 0
    while p < n or hn > 0:
        from_q1 = p < n and (hn == 0 or req[p, 0] < hk[0, 0])
        if from_q1:
            tf = req[p, 1]
            tg = req[p, 2]
            if (not _is_leaf(tf)) and (not _is_leaf(tg)) and _label(tf) == _label(tg) and tf != tg:
                # park the requests until the larger of the two nodes is reached
                if tf < tg:
                    i = _find(fu, tf)
                    lo, hi, mx = flo[i], fhi[i], tg
                else:
                    i = _find(gu, tg)
                    lo, hi, mx = glo[i], ghi[i], tf
                if i < 0:
                    raise ValueError("request to a node missing from its level")
                while p < n and req[p, 1] == tf and req[p, 2] == tg:
                    hn = _hpush(hk, hp, hn, mx, tf, tg, seq2, req[p, 3], lo, hi)
                    seq2 += _ONE
                    p += 1
                    moved += 1
                continue
            low = _NIL
            high = _NIL
        else:
            tf = hk[0, 1]
            tg = hk[0, 2]
            low = hp[0, 1]
            high = hp[0, 2]

        vf_uid, vf_low, vf_high = _NIL, _NIL, _NIL
        vg_uid, vg_low, vg_high = _NIL, _NIL, _NIL
        if not _is_leaf(tf) and _label(tf) == label:
            i = _find(fu, tf)
            if i < 0:
                raise ValueError("request to a node missing from its level")
            vf_uid, vf_low, vf_high = fu[i], flo[i], fhi[i]
        if not _is_leaf(tg) and _label(tg) == label:
            i = _find(gu, tg)
            if i < 0:
                raise ValueError("request to a node missing from its level")
            vg_uid, vg_low, vg_high = gu[i], glo[i], ghi[i]

        ident += 1
        new = base | (np.uint64(ident) << _ONE)
        l0, l1, lleaf, h0, h1, hleaf = _requests_for(
            tf, tg, vf_uid, vf_low, vf_high, vg_uid, vg_low, vg_high, low, high, op, prune)
        if lleaf:
            lsrc[nl] = new
            ltgt[nl] = l0
            nl += 1
        else:
            nreq[nr, 0] = min(l0, l1)
            nreq[nr, 1] = l0
            nreq[nr, 2] = l1
            nreq[nr, 3] = new
            nr += 1
        if hleaf:
            lsrc[nl] = new | _ONE
            ltgt[nl] = h0
            nl += 1
        else:
            nreq[nr, 0] = min(h0, h1)
            nreq[nr, 1] = h0
            nreq[nr, 2] = h1
            nreq[nr, 3] = new | _ONE
            nr += 1

        # every request for this pair now gets its in-going arc
        if from_q1:
            while p < n and req[p, 1] == tf and req[p, 2] == tg:
                s = req[p, 3]
                if s != _NIL:
                    isrc[ni] = s
                    itgt[ni] = new
                    ni += 1
                p += 1
        while hn > 0 and hk[0, 1] == tf and hk[0, 2] == tg:
            s = hp[0, 0]
            if s != _NIL:
                isrc[ni] = s
                itgt[ni] = new
                ni += 1
            hn = _hpop(hk, hp, hn)
    return nreq[:nr], isrc[:ni], itgt[:ni], lsrc[:nl], ltgt[:nl], ident + 1, moved


# -- Python-facing helpers ------------------------------------------------

Request = Union[tuple, int]


def _unpack(v) -> tuple[int, int, int]:
    if v is None:
        return NIL, NIL, NIL
    return int(v[0]), int(v[1]), int(v[2])


def requests_for(t: tuple[int, int], v_f: Optional[NodeRecord], v_g: Optional[NodeRecord],
                 low: int, high: int, op: BooleanOperator, prune: bool = False
                 ) -> tuple[Request, Request]:
    """Requests for the low and high children of the pair ``t``.

    ``v_f``/``v_g`` are the nodes currently at hand in either input (only the
    ones matching ``t`` are consulted); ``low``/``high`` carry the children of
    the other node when only one matches on an equal-label pair (else NIL).
    Each result is a pair of UIDs, or a single leaf UID when it is decided.
    """
    fu, flo, fhi = _unpack(v_f)
    gu, glo, ghi = _unpack(v_g)
    l0, l1, lleaf, h0, h1, hleaf = _requests_for(
        np.uint64(t[0]), np.uint64(t[1]), np.uint64(fu), np.uint64(flo), np.uint64(fhi),
        np.uint64(gu), np.uint64(glo), np.uint64(ghi), np.uint64(low), np.uint64(high),
        op.as_array(), prune)
    rl = int(l0) if lleaf else (int(l0), int(l1))
    rh = int(h0) if hleaf else (int(h0), int(h1))
    return rl, rh


def shortcutted_requests_for(t, v_f, v_g, low, high, op: BooleanOperator):
    """As :func:`requests_for`, collapsing pairs a single leaf already decides."""
    return requests_for(t, v_f, v_g, low, high, op, prune=True)


@dataclass
class ApplyStats:
    nodes: int = 0
    internal_arcs: int = 0
    leaf_arcs: int = 0
    parked: int = 0
    levels: int = 0

    @property
    def leaf_arc_ratio(self) -> float:
        total = self.internal_arcs + self.leaf_arcs
        return self.leaf_arcs / total if total else 0.0


def apply_files(ctx, f: NodeFile, f_neg: bool, g: NodeFile, g_neg: bool,
                op: BooleanOperator, prune: bool = True) -> tuple[ArcFiles, ApplyStats]:
    """Product construction of two non-leaf node files."""
    if f.is_leaf or g.is_leaf:
        raise ValueError("apply_files needs two diagrams with internal nodes")
    store = ctx.store
    levels = sorted({l for l, _ in f.meta.levels} | {l for l, _ in g.meta.levels})
    pq = LevelizedPQ(store, levels, width=4, nkeys=3, memory_bytes=ctx.pq_bytes, k=ctx.k)
    cf = LevelCursor(f, f_neg)
    cg = LevelCursor(g, g_neg)
    writer = ArcWriter(store)
    opa = op.as_array()
    stats = ApplyStats()
    rf, rg = f.root(), g.root()
    pq.push(np.asarray([[min(rf, rg), rf, rg, NIL]], dtype=np.uint64), [core.label_of(min(rf, rg))])
    try:
        while True:
            label = pq.setup_next_level()
            if label is None:
                break
            req = pq.pop_level()
            fu, flo, fhi = cf.level(label)
            gu, glo, ghi = cg.level(label)
            nreq, isrc, itgt, lsrc, ltgt, created, moved = apply_level(
                label, req, fu, flo, fhi, gu, glo, ghi, opa, prune)
            writer.push_nodes(label, created)
            writer.push_internal(isrc, itgt, label)
            writer.push_leaf(lsrc, ltgt)
            if len(nreq):
                pq.push(nreq, core.labels(nreq[:, 0]).astype(np.int64))
            stats.nodes += created
            stats.internal_arcs += len(isrc)
            stats.leaf_arcs += len(lsrc)
            stats.parked += moved
            stats.levels += 1
        out = writer.close()
    except BaseException:
        writer.abort()
        raise
    finally:
        cf.close()
        cg.close()
        pq.close()
    ctx.note_pq(pq)
    return out, stats
