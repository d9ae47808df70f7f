"""External merge sort and priority queues.

All structures hold fixed-width uint64 rows whose first ``nkeys`` columns
form the (lexicographic) sort key.  In-memory buffers are bounded by a byte
budget; once a buffer is full it is sorted and spilled to a run file in the
store's temp directory.  Ties are broken by insertion order.
"""
from __future__ import annotations

import heapq
import itertools
import logging
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from . import streams
from .errors import ConfigurationError, EmptyQueueError, ProtocolError
from .streams import KIND_RUN, RecordReader, RecordWriter, TempStore

logger = logging.getLogger(__name__)

_DT = np.dtype("<u8")


def lexsort_rows(rows: np.ndarray, ncols: int) -> np.ndarray:
    """Stable argsort of ``rows`` on its first ``ncols`` columns."""
    if len(rows) <= 1:
        return np.arange(len(rows))
    if ncols == 1:
        return np.argsort(rows[:, 0], kind="stable")
    return np.lexsort(tuple(rows[:, c] for c in range(ncols - 1, -1, -1)))


def _lex_compare_prefix(block: np.ndarray, ncols: int, t: np.ndarray, strict: bool) -> int:
    """Length of the prefix of sorted ``block`` whose keys are < (or <=) ``t``."""
    lt = np.zeros(len(block), dtype=bool)
    eq = np.ones(len(block), dtype=bool)
    for c in range(ncols):
        col = block[:, c]
        lt |= eq & (col < t[c])
        eq &= col == t[c]
    mask = lt if strict else (lt | eq)
    return int(mask.sum())


class MemoryMeter:
    """Tracks the bytes a structure holds in memory and the peak."""

    def __init__(self):
        self.current = 0
        self.peak = 0

    def add(self, n: int) -> None:
        self.current += n
        if self.current > self.peak:
            self.peak = self.current

    def sub(self, n: int) -> None:
        self.current -= n


class _Run:
    """A sorted run on disk, consumed front to back one block at a time."""

    def __init__(self, store: TempStore, rows: np.ndarray):
        self.store = store
        w = RecordWriter(store, store.new_path("run"), KIND_RUN, rows.shape[1])
        w.append(rows)
        w.close()
        store.note_spill(w.path)
        self.handle = streams.FileHandle(store, [w.path]).acquire()
        self.reader = RecordReader(store, w.path)
        self.width = rows.shape[1]
        self.block: np.ndarray = np.empty((0, self.width), dtype=_DT)
        self.pos = 0

    def ensure(self) -> bool:
        """Make sure a block with unread rows is loaded; False once exhausted."""
        if self.pos < len(self.block):
            return True
        n = min(self.reader.remaining(), self.reader._block)
        if n == 0:
            return False
        self.block = self.reader.take(n)
        self.pos = 0
        return True

    def exhausted(self) -> bool:
        return not self.ensure()

    def head(self) -> np.ndarray:
        return self.block[self.pos]

    def on_disk(self) -> bool:
        return self.reader.remaining() > 0

    def take_while_first_eq(self, value: int) -> np.ndarray:
        parts = []
        v = np.uint64(value)
        while self.ensure():
            rest = self.block[self.pos:]
            k = int(np.searchsorted(rest[:, 0], v, side="right"))
            if k:
                parts.append(rest[:k])
                self.pos += k
            if self.pos < len(self.block):
                break
        if not parts:
            return np.empty((0, self.width), dtype=_DT)
        return np.concatenate(parts)

    def close(self) -> None:
        self.reader.close()
        self.handle.release()


@dataclass
class SorterConfig:
    memory_bytes: int
    nkeys: int = 1
    block_bytes: int = streams.DEFAULT_BLOCK_BYTES

    def validate(self) -> None:
        if self.memory_bytes < 3 * self.block_bytes:
            raise ConfigurationError(
                f"sorter budget of {self.memory_bytes} bytes is below three blocks "
                f"({3 * self.block_bytes} bytes)")
        if self.nkeys < 1:
            raise ConfigurationError("at least one key column is required")


class ExternalSorter:
    """Stable external merge sort of uint64 rows.

    Rows are buffered until the budget (less one output block) is reached,
    then sorted and spilled as runs; the final pass merges runs block by block,
    with as many passes as the fan-in allows.
    """

    def __init__(self, store: TempStore, width: int, cfg: SorterConfig):
        cfg.validate()
        self.store = store
        self.width = width
        self.cfg = cfg
        self.nkeys = cfg.nkeys
        self.row_bytes = 8 * width
        self.block_rows = max(1, cfg.block_bytes // self.row_bytes)
        self.capacity = max(1, (cfg.memory_bytes - cfg.block_bytes) // self.row_bytes)
        self.fan_in = max(2, cfg.memory_bytes // cfg.block_bytes - 1)
        self.memory = MemoryMeter()
        self._buf: list[np.ndarray] = []
        self._buffered = 0
        self._runs: list[_Run] = []
        self.size = 0

    def push(self, rows: np.ndarray) -> None:
        rows = np.asarray(rows, dtype=_DT).reshape(-1, self.width)
        start = 0
        while start < len(rows):
            k = min(len(rows) - start, self.capacity - self._buffered)
            part = rows[start:start + k]
            self._buf.append(part)
            self._buffered += k
            self.memory.add(part.nbytes)
            start += k
            self.size += k
            if self._buffered >= self.capacity:
                self._spill()

    def _sorted_buffer(self) -> np.ndarray:
        if not self._buf:
            return np.empty((0, self.width), dtype=_DT)
        data = np.concatenate(self._buf) if len(self._buf) > 1 else self._buf[0]
        return data[lexsort_rows(data, self.nkeys)]

    def _spill(self) -> None:
        data = self._sorted_buffer()
        if len(data):
            self._runs.append(_Run(self.store, data))
        self.memory.sub(self._buffered * self.row_bytes)
        self._buf = []
        self._buffered = 0

    def _merge(self, runs: list[_Run]) -> Iterator[np.ndarray]:
        """Block-wise stable k-way merge of sorted runs (earlier run wins ties)."""
        nk = self.nkeys
        self.memory.add(len(runs) * self.block_rows * self.row_bytes)
        try:
            while True:
                live = [(i, r) for i, r in enumerate(runs) if r.ensure()]
                if not live:
                    return
                # the smallest "last loaded key" among runs that still have rows on disk
                # bounds what can safely be emitted
                bound = None
                for i, r in live:
                    if r.on_disk():
                        last = r.block[-1, :nk]
                        if bound is None or tuple(last) < tuple(bound[1]):
                            bound = (i, last)
                parts = []
                for i, r in live:
                    rest = r.block[r.pos:]
                    if bound is None:
                        k = len(rest)
                    elif i == bound[0]:
                        k = len(rest)
                    else:
                        k = _lex_compare_prefix(rest, nk, bound[1], strict=i > bound[0])
                    if k:
                        parts.append(rest[:k])
                        r.pos += k
                if parts:
                    out = np.concatenate(parts)
                    yield out[lexsort_rows(out, nk)]
        finally:
            self.memory.sub(len(runs) * self.block_rows * self.row_bytes)
            for r in runs:
                r.close()

    def sorted_blocks(self) -> Iterator[np.ndarray]:
        """Consume the sorter, yielding the sorted rows in blocks."""
        if not self._runs:
            data = self._sorted_buffer()
            self.memory.sub(self._buffered * self.row_bytes)
            self._buf, self._buffered = [], 0
            for s in range(0, len(data), self.block_rows):
                yield data[s:s + self.block_rows]
            return
        self._spill()
        runs = self._runs
        self._runs = []
        while len(runs) > self.fan_in:
            merged = []
            for g in range(0, len(runs), self.fan_in):
                group = runs[g:g + self.fan_in]
                if len(group) == 1:
                    merged.append(group[0])
                    continue
                w = RecordWriter(self.store, self.store.new_path("run"), KIND_RUN, self.width)
                for blk in self._merge(group):
                    w.append(blk)
                w.close()
                self.store.note_spill(w.path)
                merged.append(_Run.__new__(_Run))
                r = merged[-1]
                r.store, r.width, r.pos = self.store, self.width, 0
                r.block = np.empty((0, self.width), dtype=_DT)
                r.handle = streams.FileHandle(self.store, [w.path]).acquire()
                r.reader = RecordReader(self.store, w.path)
            runs = merged
        for blk in self._merge(runs):
            for s in range(0, len(blk), self.block_rows):
                yield blk[s:s + self.block_rows]

    def sorted_array(self) -> np.ndarray:
        blocks = list(self.sorted_blocks())
        if not blocks:
            return np.empty((0, self.width), dtype=_DT)
        return np.concatenate(blocks)

    @property
    def run_count(self) -> int:
        return len(self._runs)


def sort(store: TempStore, rows: np.ndarray, cfg: SorterConfig) -> np.ndarray:
    """Sort ``rows`` (n, width) on the first ``cfg.nkeys`` columns."""
    rows = np.asarray(rows, dtype=_DT)
    if rows.ndim == 1:
        rows = rows.reshape(-1, 1)
    s = ExternalSorter(store, rows.shape[1], cfg)
    s.push(rows)
    return s.sorted_array()


class ExternalPQ:
    """General external priority queue with push/top/pop on single rows.

    New elements live in an in-memory binary heap; when it outgrows its budget
    it is sorted and spilled as a run.  The minimum is the smaller of the heap
    top and the heads of all runs (kept in a second, small heap).
    """

    def __init__(self, store: TempStore, width: int, nkeys: int, memory_bytes: int):
        self.store = store
        self.width = width
        self.nkeys = nkeys
        self.capacity = max(1, memory_bytes // (8 * (width + 1)))
        self._heap: list[tuple] = []
        self._runs: list[_Run] = []
        self._run_heads: list[tuple] = []
        self._seq = itertools.count()
        self._size = 0
        self.memory = MemoryMeter()

    def __len__(self) -> int:
        return self._size

    def empty(self) -> bool:
        return self._size == 0

    def push(self, row: Sequence[int]) -> None:
        row = tuple(int(x) for x in row)
        if len(row) != self.width:
            raise ValueError(f"expected {self.width} columns, got {len(row)}")
        heapq.heappush(self._heap, row[:self.nkeys] + (next(self._seq),) + row[self.nkeys:])
        self.memory.add(8 * (self.width + 1))
        self._size += 1
        if len(self._heap) >= self.capacity:
            self._spill()

    def _spill(self) -> None:
        data = np.asarray(sorted(self._heap), dtype=_DT).reshape(-1, self.width + 1)
        self.memory.sub(8 * (self.width + 1) * len(self._heap))
        self._heap = []
        run = _Run(self.store, data)
        idx = len(self._runs)
        self._runs.append(run)
        self._push_head(idx)

    def _push_head(self, idx: int) -> None:
        r = self._runs[idx]
        if r.ensure():
            heapq.heappush(self._run_heads, tuple(int(x) for x in r.head()) + (idx,))
        else:
            r.close()

    def _strip(self, full: tuple) -> tuple:
        return full[:self.nkeys] + full[self.nkeys + 1:self.width + 1]

    def _min_source(self) -> int:
        if self._size == 0:
            raise EmptyQueueError("priority queue is empty")
        if not self._run_heads:
            return 0
        if not self._heap:
            return 1
        k = self.nkeys + 1
        return 0 if self._heap[0][:k] < self._run_heads[0][:k] else 1

    def top(self) -> tuple:
        if self._min_source() == 0:
            return self._strip(self._heap[0])
        return self._strip(self._run_heads[0])

    def pop(self) -> tuple:
        if self._min_source() == 0:
            self.memory.sub(8 * (self.width + 1))
            out = heapq.heappop(self._heap)
        else:
            out = heapq.heappop(self._run_heads)
            idx = out[-1]
            self._runs[idx].pos += 1
            self._push_head(idx)
        self._size -= 1
        return self._strip(out)

    def close(self) -> None:
        for r in self._runs:
            if not r.handle.refcount == 0:
                r.close()
        self._runs = []
        self._run_heads = []
        self._heap = []
        self._size = 0


class _Bucket:
    """One level of the levelized queue: a memory block plus sorted runs."""

    def __init__(self):
        self.mem: list[np.ndarray] = []
        self.mem_rows = 0
        self.runs: list[_Run] = []
        self.size = 0


class _Overflow:
    """Merge-sort backed queue for elements beyond the bucket window.

    Rows carry their level position as a leading column; runs are sorted on
    (position, key, seq), so extracting the next level is a prefix read of
    every run plus a filter of the memory buffer.
    """

    def __init__(self, store: TempStore, capacity_rows: int, meter: MemoryMeter):
        self.store = store
        self.capacity = max(1, capacity_rows)
        self.meter = meter
        self.mem: list[np.ndarray] = []
        self.mem_rows = 0
        self.runs: list[_Run] = []
        self.size = 0
        self.nsort = 1

    def push(self, rows: np.ndarray, nsort: int) -> None:
        self.nsort = nsort
        self.mem.append(rows)
        self.mem_rows += len(rows)
        self.size += len(rows)
        self.meter.add(rows.nbytes)
        if self.mem_rows >= self.capacity:
            data = np.concatenate(self.mem)
            self.meter.sub(data.nbytes)
            self.mem, self.mem_rows = [], 0
            self.runs.append(_Run(self.store, data[lexsort_rows(data, nsort)]))

    def min_pos(self) -> Optional[int]:
        best = None
        for m in self.mem:
            v = int(m[:, 0].min())
            best = v if best is None else min(best, v)
        for r in self.runs:
            if r.ensure():
                v = int(r.head()[0])
                best = v if best is None else min(best, v)
        return best

    def extract(self, pos: int) -> np.ndarray:
        parts = []
        keep = []
        p = np.uint64(pos)
        for m in self.mem:
            sel = m[:, 0] == p
            if sel.any():
                got = m[sel]
                parts.append(got)
                self.mem_rows -= len(got)
                self.meter.sub(got.nbytes)
                rest = m[~sel]
                if len(rest):
                    keep.append(rest)
            else:
                keep.append(m)
        self.mem = keep
        alive = []
        for r in self.runs:
            got = r.take_while_first_eq(pos)
            if len(got):
                parts.append(got)
            if r.ensure():
                alive.append(r)
            else:
                r.close()
        self.runs = alive
        if not parts:
            return np.empty((0, 0), dtype=_DT)
        out = np.concatenate(parts) if len(parts) > 1 else parts[0]
        self.size -= len(out)
        return out

    def close(self) -> None:
        for r in self.runs:
            r.close()
        self.runs = []
        self.mem = []


class LevelizedPQ:
    """Priority queue for sweeps that resolve requests one level at a time.

    ``levels`` lists the labels in processing order (ascending for top-down,
    descending for bottom-up sweeps).  Elements are pushed with the label of
    the level they belong to, which must lie strictly after the current one.
    Elements within the next ``k`` levels go into per-level buckets, the rest
    into an overflow queue.  :meth:`setup_next_level` jumps to the next level
    with pending elements and merges that level's bucket runs and overflow
    elements into the final order; its elements are then consumed with
    :meth:`pop_level` (all at once) or :meth:`top`/:meth:`pop`.

    Rows are uint64 arrays whose first ``nkeys`` columns are the sort key.
    """

    def __init__(self, store: TempStore, levels: Sequence[int], width: int, nkeys: int,
                 memory_bytes: int, k: int = 4, block_bytes: Optional[int] = None):
        if not 1 <= k <= 64:
            raise ConfigurationError(f"bucket count k={k} outside 1..64")
        self.store = store
        self.levels = np.asarray(list(levels), dtype=np.int64)
        if len(self.levels) > 1:
            d = np.diff(self.levels)
            if not ((d > 0).all() or (d < 0).all()):
                raise ConfigurationError("levels must be strictly monotone")
        self._descending = len(self.levels) > 1 and self.levels[1] < self.levels[0]
        self._sorted_levels = self.levels[::-1] if self._descending else self.levels
        self.width = width
        self.nkeys = nkeys
        self.k = k
        self.row_bytes = 8 * (width + 1)
        share = max(1, memory_bytes // (k + 1))
        block = block_bytes if block_bytes is not None else store.block_bytes
        self.bucket_rows = max(1, min(share, block) // self.row_bytes)
        self.memory = MemoryMeter()
        self._overflow = _Overflow(store, share // (self.row_bytes + 8), self.memory)
        self._buckets: dict[int, _Bucket] = {}
        self._seq = itertools.count()
        self._seq_next = 0
        self.current = -1
        self._cur: np.ndarray = np.empty((0, width + 1), dtype=_DT)
        self._cur_pos = 0
        self._size = 0
        self.overflow_pushes = 0

    # -- bookkeeping --

    def __len__(self) -> int:
        return self._size

    def empty(self) -> bool:
        return self._size == 0

    @property
    def current_label(self) -> Optional[int]:
        return int(self.levels[self.current]) if 0 <= self.current < len(self.levels) else None

    def _positions(self, labels: np.ndarray) -> np.ndarray:
        labels = np.asarray(labels, dtype=np.int64)
        idx = np.searchsorted(self._sorted_levels, labels)
        idx_c = np.minimum(idx, len(self._sorted_levels) - 1)
        if len(labels) and (idx >= len(self._sorted_levels)).any() or \
                len(labels) and (self._sorted_levels[idx_c] != labels).any():
            bad = labels[(idx >= len(self._sorted_levels)) | (self._sorted_levels[idx_c] != labels)]
            raise ProtocolError(f"label {int(bad[0])} is not one of the queue's levels")
        return (len(self.levels) - 1 - idx) if self._descending else idx

    # -- pushing --

    def push(self, rows: np.ndarray, labels) -> None:
        """Push rows (n, width) whose levels are given by ``labels``."""
        rows = np.asarray(rows, dtype=_DT).reshape(-1, self.width)
        n = len(rows)
        if n == 0:
            return
        labels = np.broadcast_to(np.asarray(labels, dtype=np.int64), (n,))
        pos = self._positions(labels)
        if (pos <= self.current).any():
            bad = int(labels[pos <= self.current][0])
            raise ProtocolError(
                f"push to level {bad}, which is not after the current level {self.current_label}")
        seq = np.arange(self._seq_next, self._seq_next + n, dtype=_DT)
        self._seq_next += n
        full = np.empty((n, self.width + 1), dtype=_DT)
        full[:, :self.nkeys] = rows[:, :self.nkeys]
        full[:, self.nkeys] = seq
        full[:, self.nkeys + 1:] = rows[:, self.nkeys:]
        self._size += n
        near = pos <= self.current + self.k
        if near.all():
            self._to_buckets(full, pos)
        else:
            if near.any():
                self._to_buckets(full[near], pos[near])
            far = ~near
            o = np.empty((int(far.sum()), self.width + 2), dtype=_DT)
            o[:, 0] = pos[far]
            o[:, 1:] = full[far]
            self.overflow_pushes += len(o)
            self._overflow.push(o, self.nkeys + 2)

    def push_one(self, row: Sequence[int], label: int) -> None:
        self.push(np.asarray([row], dtype=_DT), [label])

    def _to_buckets(self, full: np.ndarray, pos: np.ndarray) -> None:
        if len(pos) and (pos == pos[0]).all():
            self._bucket_add(int(pos[0]), full)
            return
        order = np.argsort(pos, kind="stable")
        spos = pos[order]
        cuts = np.flatnonzero(np.diff(spos)) + 1
        for chunk in np.split(order, cuts):
            self._bucket_add(int(pos[chunk[0]]), full[chunk])

    def _bucket_add(self, p: int, rows: np.ndarray) -> None:
        b = self._buckets.get(p)
        if b is None:
            b = self._buckets[p] = _Bucket()
        b.mem.append(rows)
        b.mem_rows += len(rows)
        b.size += len(rows)
        self.memory.add(rows.nbytes)
        if b.mem_rows >= self.bucket_rows:
            data = np.concatenate(b.mem) if len(b.mem) > 1 else b.mem[0]
            self.memory.sub(data.nbytes)
            b.mem, b.mem_rows = [], 0
            b.runs.append(_Run(self.store, data[lexsort_rows(data, self.nkeys + 1)]))

    # -- levels --

    def has_current(self) -> bool:
        return self._cur_pos < len(self._cur)

    def _next_position(self) -> Optional[int]:
        cands = [p for p, b in self._buckets.items() if b.size]
        if self._overflow.size:
            cands.append(self._overflow.min_pos())
        return min(cands) if cands else None

    def peek_next_level(self) -> Optional[int]:
        """Label of the level :meth:`setup_next_level` would move to."""
        if self.has_current():
            return self.current_label
        p = self._next_position()
        return None if p is None else int(self.levels[p])

    def setup_next_level(self) -> Optional[int]:
        """Advance to the next level with pending elements and return its label.

        Returns None when the queue is empty.
        """
        if self.has_current():
            raise ProtocolError(
                f"level {self.current_label} still has {len(self._cur) - self._cur_pos} elements")
        if self._size == 0:
            self._cur = self._cur[:0]
            self._cur_pos = 0
            return None
        op = self._overflow.min_pos() if self._overflow.size else None
        p = self._next_position()
        self.current = p
        parts = []
        b = self._buckets.pop(p, None)
        if b is not None:
            for r in b.runs:
                while r.ensure():
                    parts.append(r.block[r.pos:])
                    r.pos = len(r.block)
                r.close()
            for m in b.mem:
                self.memory.sub(m.nbytes)
            parts.extend(b.mem)
        if op == p:
            o = self._overflow.extract(p)
            if len(o):
                parts.append(o[:, 1:])
        data = np.concatenate(parts) if len(parts) > 1 else parts[0]
        self._cur = data[lexsort_rows(data, self.nkeys + 1)]
        self._cur_pos = 0
        return int(self.levels[p])

    def _strip(self, full: np.ndarray) -> np.ndarray:
        return np.delete(full, self.nkeys, axis=-1)

    def pop_level(self) -> np.ndarray:
        """All remaining elements of the current level, in order."""
        out = self._cur[self._cur_pos:]
        self._size -= len(out)
        self._cur_pos = len(self._cur)
        return self._strip(out)

    def top(self) -> tuple:
        if not self.has_current():
            raise EmptyQueueError("no elements left on the current level")
        return tuple(int(x) for x in self._strip(self._cur[self._cur_pos]))

    def pop(self) -> tuple:
        out = self.top()
        self._cur_pos += 1
        self._size -= 1
        return out

    def close(self) -> None:
        for b in self._buckets.values():
            for r in b.runs:
                r.close()
        self._buckets = {}
        self._overflow.close()
