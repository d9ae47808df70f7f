"""Bottom-up reduction of an unreduced (arc-based) diagram.

Levels are processed deepest first.  For a level j the arcs out of its nodes
come from two places: the leaf-arc file (read backwards, so in descending
source order) and the reduction queue, which holds arcs whose target has
already been mapped to its node in the output.  Pairing each node's low and
high arc gives the node; nodes with equal children vanish (their parents are
pointed at the child) and the rest are sorted by children in descending order
so duplicates become neighbours.  Survivors are numbered MAX_ID, MAX_ID - 1,
... in that order, which makes every output level sorted by children as well
as by identifier.  The mapping is then pushed along the internal arcs into
level j (read backwards from the internal-arc file) to the parents.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import core
from .core import MAX_ID
from .errors import IntegrityError
from .extmem import ExternalSorter, LevelizedPQ, SorterConfig
from .streams import (ArcFiles, KIND_LEAF_ARCS, NodeFile, NodeWriter, RecordWriter,
                      write_leaf)

logger = logging.getLogger(__name__)

_DT = np.dtype("<u8")
_EMPTY2 = np.empty((0, 2), dtype=_DT)


@dataclass
class ReduceStats:
    input_nodes: int = 0
    output_nodes: int = 0
    rule1: int = 0
    merged: int = 0


def sort_leaf_arcs(ctx, arcs: ArcFiles) -> None:
    """Restore source order of the leaf-arc file (after bridging sweeps)."""
    cfg = SorterConfig(memory_bytes=max(ctx.sorter_bytes, 3 * ctx.store.block_bytes),
                       nkeys=1, block_bytes=ctx.store.block_bytes)
    sorter = ExternalSorter(ctx.store, 2, cfg)
    r = arcs.leaf_reader()
    try:
        while r.has_next():
            sorter.push(r.take(min(r.remaining(), r._block)))
    finally:
        r.close()
    w = RecordWriter(ctx.store, arcs.leaf_path + ".sorted", KIND_LEAF_ARCS, 2)
    for blk in sorter.sorted_blocks():
        w.append(blk)
    w.close(arcs.leaf_levels)
    import os
    os.replace(w.path, arcs.leaf_path)
    arcs.needs_sorting = False
    ctx.note_sorter(sorter)


def reduce_level(label: int, arcs: np.ndarray):
    """Reduce one level given all its out-arcs ``(source, target)``.

    Returns ``(uids, mapped, out_rows, n_rule1)`` where ``uids`` are the
    level's unreduced node UIDs (ascending), ``mapped`` their images and
    ``out_rows`` the surviving nodes as (uid, low, high) rows, descending.
    """
    if len(arcs) % 2:
        raise IntegrityError(f"level {label}: odd number of out-arcs ({len(arcs)})")
    order = np.argsort(arcs[:, 0], kind="stable")
    src = arcs[order, 0]
    tgt = arcs[order, 1]
    lo_src = src[0::2]
    hi_src = src[1::2]
    if (lo_src & np.uint64(1)).any() or (hi_src != (lo_src | np.uint64(1))).any():
        raise IntegrityError(f"level {label}: a node lacks exactly one low and one high arc")
    uids = lo_src
    lows = tgt[0::2]
    highs = tgt[1::2]
    mapped = np.empty(len(uids), dtype=_DT)
    rule1 = lows == highs
    mapped[rule1] = lows[rule1]
    rest = np.flatnonzero(~rule1)
    if len(rest):
        rl, rh = lows[rest], highs[rest]
        o = np.lexsort((rh, rl))[::-1]
        rl, rh = rl[o], rh[o]
        fresh = np.ones(len(o), dtype=bool)
        fresh[1:] = (rl[1:] != rl[:-1]) | (rh[1:] != rh[:-1])
        ids = np.uint64(MAX_ID + 1) - np.cumsum(fresh).astype(_DT)
        new = core.encode_nodes(label, ids)
        mapped[rest[o]] = new
        out = np.stack([new[fresh], rl[fresh], rh[fresh]], axis=1)
    else:
        out = np.empty((0, 3), dtype=_DT)
    return uids, mapped, out, int(rule1.sum())


def reduce_arcs(ctx, arcs: ArcFiles) -> tuple[NodeFile, ReduceStats]:
    """Reduce an unreduced diagram into a canonical node file."""
    store = ctx.store
    if arcs.needs_sorting:
        sort_leaf_arcs(ctx, arcs)
    levels_desc = [l for l, _ in reversed(arcs.node_levels)]
    node_counts = dict(arcs.node_levels)
    int_counts = dict(arcs.internal_levels)
    leaf_counts = dict(arcs.leaf_levels)
    if not levels_desc:
        raise IntegrityError("unreduced diagram without nodes")
    if node_counts[levels_desc[-1]] != 1:
        raise IntegrityError("the top level of an unreduced diagram must hold only the root")
    pq = LevelizedPQ(store, levels_desc, width=2, nkeys=1, memory_bytes=ctx.pq_bytes, k=ctx.k)
    leaf_r = arcs.leaf_reader(reverse=True)
    int_r = arcs.internal_reader(reverse=True)
    writer = None
    stats = ReduceStats(input_nodes=arcs.node_count)
    root = None
    try:
        for j in levels_desc:
            parts = []
            n_leaf = leaf_counts.get(j, 0)
            if n_leaf:
                parts.append(leaf_r.take(n_leaf))
            if pq.peek_next_level() == j:
                pq.setup_next_level()
                parts.append(pq.pop_level())
            level_arcs = np.concatenate(parts) if len(parts) > 1 else (parts[0] if parts else _EMPTY2)
            if len(level_arcs) != 2 * node_counts[j]:
                raise IntegrityError(
                    f"level {j}: {len(level_arcs)} out-arcs for {node_counts[j]} nodes")
            uids, mapped, out, n1 = reduce_level(j, level_arcs)
            stats.rule1 += n1
            stats.merged += len(uids) - n1 - len(out)
            if len(out):
                if writer is None:
                    writer = NodeWriter(store)
                writer.push_level(out[:, 0], out[:, 1], out[:, 2])
                stats.output_nodes += len(out)
            n_in = int_counts.get(j, 0)
            if n_in:
                inc = int_r.take(n_in)
                idx = np.searchsorted(uids, inc[:, 1])
                idx_c = np.minimum(idx, len(uids) - 1)
                if (uids[idx_c] != inc[:, 1]).any():
                    raise IntegrityError(f"level {j}: arc into a node that has no out-arcs")
                fwd = np.stack([inc[:, 0], mapped[idx_c]], axis=1)
                pq.push(fwd, core.labels(inc[:, 0]).astype(np.int64))
            root = mapped
        if not pq.empty():
            raise IntegrityError("arcs left over after the top level")
        if leaf_r.has_next() or int_r.has_next():
            raise IntegrityError("arc files hold arcs outside the recorded levels")
        if writer is None:
            nf = write_leaf(store, core.value_of(int(root[0])))
        else:
            nf = writer.close(canonical=True)
    except BaseException:
        if writer is not None:
            writer.abort()
        raise
    finally:
        leaf_r.close()
        int_r.close()
        pq.close()
    ctx.note_pq(pq)
    return nf, stats
