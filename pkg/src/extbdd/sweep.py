"""Generic top-down product sweep over several node files.

A request is a tuple of UIDs, one per input (NIL where an input plays no
part), plus the source arc it came from.  Requests wait in a levelized
priority queue keyed by their smallest component; each level's distinct
tuples are handed to a ``resolve`` callback which either

* creates a node: ``("node", r_low, r_high)``, or
* forwards the request unchanged in identity: ``("bridge", r)``, so that the
  incoming arcs are re-targeted at ``r``.

Children and bridge targets are leaf UIDs or tuples whose smallest internal
component lies strictly below the current level.  The output is the same
semi-transposed arc pair Apply produces; bridging into leaves emits leaf arcs
out of order and flags the file for sorting.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import core
from .core import NIL
from .extmem import LevelizedPQ
from .streams import ArcFiles, ArcWriter, LevelCursor, NodeFile

logger = logging.getLogger(__name__)

_DT = np.dtype("<u8")
_LEAF = core.LEAF_BIT

Target = Union[int, tuple]


def min_label(t: tuple) -> int:
    """Smallest label among the internal components of ``t``."""
    return min(core.label_of(u) for u in t if not u & _LEAF)


def is_leaf(u: int) -> bool:
    return bool(u & _LEAF) and u != NIL


class LevelView:
    """The current level's nodes of every input, for lookups by UID."""

    def __init__(self, label: int, tables: list[dict]):
        self.label = label
        self._tables = tables

    def children(self, k: int, uid: int) -> tuple[int, int]:
        return self._tables[k][uid]

    def cofactor(self, k: int, uid: int, high: bool) -> int:
        """Child of ``uid`` if it sits on this level, else ``uid`` itself."""
        if uid == NIL or uid & _LEAF or core.label_of(uid) != self.label:
            return uid
        return self._tables[k][uid][1 if high else 0]


@dataclass
class SweepResult:
    arcs: Optional[ArcFiles]
    leaf: Optional[bool]
    nodes: int = 0


def product_sweep(ctx, inputs: Sequence[tuple[NodeFile, bool]], root: Target,
                  resolve: Callable[[tuple, LevelView], tuple]) -> SweepResult:
    """Run the sweep from ``root`` (a leaf UID or a tuple)."""
    if isinstance(root, int):
        return SweepResult(None, core.value_of(root))
    n = len(inputs)
    store = ctx.store
    levels = sorted({l for nf, _ in inputs for l, _ in nf.meta.levels})
    width = n + 2
    pq = LevelizedPQ(store, levels, width=width, nkeys=n + 1, memory_bytes=ctx.pq_bytes, k=ctx.k)
    cursors = [LevelCursor(nf, neg) for nf, neg in inputs]
    writer = ArcWriter(store)
    root_leaf: Optional[int] = None
    total = 0

    def push(tuples: list[tuple], sources: list[int]) -> None:
        if not tuples:
            return
        rows = np.empty((len(tuples), width), dtype=_DT)
        rows[:, 1:n + 1] = np.asarray(tuples, dtype=_DT)
        rows[:, 0] = rows[:, 1:n + 1].min(axis=1)
        rows[:, n + 1] = np.asarray(sources, dtype=_DT)
        pq.push(rows, core.labels(rows[:, 0]).astype(np.int64))

    push([root], [NIL])
    try:
        while True:
            label = pq.setup_next_level()
            if label is None:
                break
            rows = pq.pop_level()
            tables = []
            for c in cursors:
                u, lo, hi = c.level(label)
                tables.append(dict(zip(u.tolist(), zip(lo.tolist(), hi.tolist()))))
            view = LevelView(label, tables)
            keys = rows[:, 1:n + 1]
            if len(rows) > 1:
                brk = np.flatnonzero((keys[1:] != keys[:-1]).any(axis=1)) + 1
            else:
                brk = np.empty(0, dtype=np.int64)
            starts = [0] + brk.tolist()
            ends = brk.tolist() + [len(rows)]
            srcs_all = rows[:, n + 1].tolist()
            tuples_all = keys.tolist()
            ident = 0
            base = label << core.LABEL_SHIFT
            new_t: list[tuple] = []
            new_s: list[int] = []
            isrc: list[int] = []
            itgt: list[int] = []
            lsrc: list[int] = []
            ltgt: list[int] = []
            for a, b in zip(starts, ends):
                t = tuple(tuples_all[a])
                srcs = srcs_all[a:b]
                res = resolve(t, view)
                if res[0] == "node":
                    new = base | (ident << 1)
                    ident += 1
                    for s in srcs:
                        if s != NIL:
                            isrc.append(s)
                            itgt.append(new)
                    for r, flag in ((res[1], 0), (res[2], 1)):
                        if isinstance(r, tuple):
                            new_t.append(r)
                            new_s.append(new | flag)
                        else:
                            lsrc.append(new | flag)
                            ltgt.append(r)
                else:
                    r = res[1]
                    if isinstance(r, tuple):
                        new_t.extend([r] * len(srcs))
                        new_s.extend(srcs)
                    else:
                        for s in srcs:
                            if s == NIL:
                                root_leaf = r
                            else:
                                lsrc.append(s)
                                ltgt.append(r)
                                writer.needs_sorting = True
            writer.push_nodes(label, ident)
            total += ident
            writer.push_internal(np.asarray(isrc, dtype=_DT), np.asarray(itgt, dtype=_DT), label)
            writer.push_leaf(np.asarray(lsrc, dtype=_DT), np.asarray(ltgt, dtype=_DT))
            push(new_t, new_s)
        if root_leaf is not None:
            writer.abort()
            return SweepResult(None, core.value_of(root_leaf))
        return SweepResult(writer.close(), None, total)
    except BaseException:
        writer.abort()
        raise
    finally:
        for c in cursors:
            c.close()
        pq.close()
        ctx.note_pq(pq)
