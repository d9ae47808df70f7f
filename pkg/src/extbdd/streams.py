"""File-backed record streams.

Every BDD, every unreduced Apply output and every spilled sorter/queue run is a
file of fixed-width little-endian uint64 records.  Files carry a 64-byte header
and, after the payload, a table of (label, count) pairs.  See FORMAT.md.

Files are reference counted through :class:`FileHandle`; the file disappears
from disk the moment its count drops to zero.
"""
from __future__ import annotations

import itertools
import logging
import os
import struct
import threading
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from . import core
from .core import LevelInfo, NodeRecord, ArcRecord
from .errors import EndOfStream, IntegrityError, PreconditionError

logger = logging.getLogger(__name__)

MAGIC = b"XBDD"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sHHIIQQQQ")
HEADER_SIZE = 64

KIND_NODES = 1
KIND_INTERNAL_ARCS = 2
KIND_LEAF_ARCS = 3
KIND_RUN = 4

FLAG_CANONICAL = 1
FLAG_LEAF_ONLY = 2
FLAG_NEEDS_SORTING = 4
FLAG_REDUCED = 8

DEFAULT_BLOCK_BYTES = 2 << 20

_DT = core.UID_DTYPE


@dataclass
class IOStats:
    """Block-level I/O counters, shared by every stream of a store."""

    blocks_read: int = 0
    blocks_written: int = 0
    bytes_read: int = 0
    bytes_written: int = 0

    def snapshot(self) -> tuple:
        return (self.blocks_read, self.blocks_written, self.bytes_read, self.bytes_written)


class TempStore:
    """Temp-file namespace: naming, census of live files and I/O counters."""

    def __init__(self, temp_dir: str, block_bytes: int = DEFAULT_BLOCK_BYTES):
        self.temp_dir = os.path.abspath(temp_dir)
        self.block_bytes = int(block_bytes)
        self.io = IOStats()
        self._counter = itertools.count()
        self._live: dict[int, "FileHandle"] = {}
        self._lock = threading.Lock()
        self.spills = 0
        self.spill_bytes = 0
        self.peak_spill_files = 0

    def note_spill(self, path: str) -> None:
        """Record a spilled run that has just been written to ``path``."""
        self.spills += 1
        self.spill_bytes += os.path.getsize(path)
        on_disk = sum(1 for n in os.listdir(self.temp_dir) if n.endswith(".run"))
        self.peak_spill_files = max(self.peak_spill_files, on_disk)

    def new_path(self, suffix: str) -> str:
        with self._lock:
            n = next(self._counter)
        return os.path.join(self.temp_dir, f"{n}.{suffix}")

    def new_stem(self) -> str:
        with self._lock:
            n = next(self._counter)
        return os.path.join(self.temp_dir, str(n))

    def block_records(self, width: int) -> int:
        return max(1, self.block_bytes // (8 * width))

    def _register(self, fh: "FileHandle") -> None:
        with self._lock:
            self._live[id(fh)] = fh

    def _unregister(self, fh: "FileHandle") -> None:
        with self._lock:
            self._live.pop(id(fh), None)

    def live_handles(self) -> list["FileHandle"]:
        with self._lock:
            return list(self._live.values())

    def live_paths(self) -> list[str]:
        return sorted(p for fh in self.live_handles() for p in fh.paths)


class FileHandle:
    """Reference count over one or more files; deletes them at count zero."""

    def __init__(self, store: TempStore, paths: Sequence[str]):
        self.store = store
        self.paths = tuple(paths)
        self.refcount = 0
        self._lock = threading.Lock()
        store._register(self)

    def acquire(self) -> "FileHandle":
        with self._lock:
            self.refcount += 1
        return self

    def release(self) -> None:
        with self._lock:
            if self.refcount <= 0:
                raise IntegrityError(f"release of unreferenced file {self.paths}")
            self.refcount -= 1
            dead = self.refcount == 0
        if dead:
            self.delete()

    def delete(self) -> None:
        for p in self.paths:
            try:
                os.remove(p)
            except FileNotFoundError:
                pass
        self.store._unregister(self)

    def __repr__(self):
        return f"FileHandle({self.paths}, refcount={self.refcount})"


# -- headers -------------------------------------------------------------


@dataclass
class Header:
    kind: int
    width: int
    flags: int = 0
    count: int = 0
    level_count: int = 0
    leaf_value: int = 0
    aux: int = 0

    def pack(self) -> bytes:
        raw = HEADER.pack(MAGIC, FORMAT_VERSION, self.kind, self.width, self.flags,
                          self.count, self.level_count, self.leaf_value, self.aux)
        return raw.ljust(HEADER_SIZE, b"\0")

    @classmethod
    def unpack(cls, raw: bytes, path: str = "?") -> "Header":
        if len(raw) < HEADER_SIZE:
            raise IntegrityError(f"{path}: truncated header")
        magic, version, kind, width, flags, count, nlev, leaf, aux = HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise IntegrityError(f"{path}: bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise IntegrityError(f"{path}: unsupported format version {version}")
        return cls(kind, width, flags, count, nlev, leaf, aux)


def read_header(path: str, io: Optional[IOStats] = None) -> tuple[Header, list[LevelInfo]]:
    hdr, levels, _ = read_tables(path, io)
    return hdr, levels


def read_tables(path: str, io: Optional[IOStats] = None
                ) -> tuple[Header, list[LevelInfo], list[LevelInfo]]:
    """Header, level table and the optional second table (arc files only)."""
    with open(path, "rb") as f:
        hdr = Header.unpack(f.read(HEADER_SIZE), path)
        f.seek(HEADER_SIZE + 8 * hdr.width * hdr.count)
        n = 2 * hdr.level_count
        m = 2 * hdr.aux if hdr.kind == KIND_INTERNAL_ARCS else 0
        table = np.fromfile(f, dtype=_DT, count=n + m)
    if io is not None:
        io.blocks_read += 1
        io.bytes_read += HEADER_SIZE + table.nbytes
    if len(table) != n + m:
        raise IntegrityError(f"{path}: truncated level table")
    levels = [LevelInfo(int(a), int(b)) for a, b in table[:n].reshape(-1, 2)]
    extra = [LevelInfo(int(a), int(b)) for a, b in table[n:].reshape(-1, 2)]
    return hdr, levels, extra


# -- writing -------------------------------------------------------------


class RecordWriter:
    """Append-only buffered writer of fixed-width uint64 records."""

    def __init__(self, store: TempStore, path: str, kind: int, width: int):
        self.store = store
        self.path = path
        self.kind = kind
        self.width = width
        self.count = 0
        self.flags = 0
        self.leaf_value = 0
        self.aux = 0
        self._buf: list[np.ndarray] = []
        self._buffered = 0
        self._block = store.block_records(width)
        self._f = open(path, "wb")
        self._f.write(b"\0" * HEADER_SIZE)
        self.closed = False

    def append(self, rows: np.ndarray) -> None:
        rows = np.ascontiguousarray(rows, dtype=_DT).reshape(-1, self.width)
        if not len(rows):
            return
        self._buf.append(rows)
        self._buffered += len(rows)
        self.count += len(rows)
        if self._buffered >= self._block:
            self._flush()

    def _flush(self) -> None:
        if not self._buf:
            return
        data = self._buf[0] if len(self._buf) == 1 else np.concatenate(self._buf)
        data.tofile(self._f)
        io = self.store.io
        io.blocks_written += -(-len(data) // self._block)
        io.bytes_written += data.nbytes
        self._buf = []
        self._buffered = 0

    def close(self, levels: Sequence[LevelInfo] = (), extra: Sequence[LevelInfo] = ()) -> None:
        self._flush()
        if extra:
            self.aux = len(extra)
        table = np.asarray([(l, c) for l, c in list(levels) + list(extra)],
                           dtype=_DT).reshape(-1)
        table.tofile(self._f)
        hdr = Header(self.kind, self.width, self.flags, self.count, len(levels),
                     self.leaf_value, self.aux)
        self._f.seek(0)
        self._f.write(hdr.pack())
        self._f.close()
        self.store.io.blocks_written += 1
        self.store.io.bytes_written += HEADER_SIZE + table.nbytes
        self.closed = True

    def abort(self) -> None:
        if not self.closed:
            self._f.close()
            self.closed = True
        try:
            os.remove(self.path)
        except FileNotFoundError:
            pass


@dataclass
class NodeMeta:
    """Metadata of a node file: what ``meta_of`` reports."""

    count: int
    levels: list[LevelInfo]
    canonical: bool
    leaf_value: Optional[bool] = None
    reduced: bool = True

    @property
    def varcount(self) -> int:
        return len(self.levels)


class NodeFile(FileHandle):
    """A reduced BDD on disk: node records in strictly descending UID order."""

    def __init__(self, store: TempStore, path: str, meta: NodeMeta):
        super().__init__(store, [path])
        self.path = path
        self.meta = meta

    @property
    def is_leaf(self) -> bool:
        return self.meta.leaf_value is not None

    def reader(self, reverse: bool = True) -> "RecordReader":
        """Reverse (the default) yields ascending UIDs, the top-down order."""
        return RecordReader(self.store, self.path, reverse=reverse, record=NodeRecord)

    def root(self) -> int:
        """UID of the root (first record in top-down order)."""
        if self.is_leaf:
            return core.encode_leaf(self.meta.leaf_value)
        r = self.reader()
        return r.peek().uid


def meta_of(nf: NodeFile) -> tuple[int, int, list[LevelInfo], bool]:
    m = nf.meta
    return m.count, m.varcount, list(m.levels), m.canonical


def load_node_file(store: TempStore, path: str) -> NodeFile:
    """Open an existing node file (e.g. one copied from elsewhere)."""
    hdr, levels = read_header(path, store.io)
    if hdr.kind != KIND_NODES:
        raise IntegrityError(f"{path}: not a node file (kind {hdr.kind})")
    leaf = bool(hdr.leaf_value) if hdr.flags & FLAG_LEAF_ONLY else None
    meta = NodeMeta(hdr.count, levels, bool(hdr.flags & FLAG_CANONICAL), leaf,
                    bool(hdr.flags & (FLAG_REDUCED | FLAG_CANONICAL)))
    return NodeFile(store, path, meta)


def write_leaf(store: TempStore, value: bool) -> NodeFile:
    w = RecordWriter(store, store.new_path("nodes"), KIND_NODES, 3)
    w.flags = FLAG_LEAF_ONLY | FLAG_CANONICAL | FLAG_REDUCED
    w.leaf_value = int(bool(value))
    w.close()
    return NodeFile(store, w.path, NodeMeta(0, [], True, bool(value)))


class NodeWriter:
    """Checked writer for node files; nodes must arrive in descending order.

    The writer verifies the ordering and that every child is a leaf or an
    already written node.  It also watches whether the output is in the
    canonical form produced by Reduce (no redundant or duplicate nodes, each
    level sorted by its children, identifiers packed downward from MAX_ID, all
    nodes reachable); only then is the file flagged canonical.
    """

    def __init__(self, store: TempStore):
        self.store = store
        self._w = RecordWriter(store, store.new_path("nodes"), KIND_NODES, 3)
        self._last: Optional[int] = None
        self._seen: set[int] = set()
        self._unreferenced: set[int] = set()
        self._levels: list[list[int]] = []
        self._canonical = True
        self._prev_children: Optional[tuple[int, int]] = None
        self._rows: list[tuple[int, int, int]] = []
        self._reduced = True
        self._level_children: set[tuple[int, int]] = set()

    def push(self, n: NodeRecord | tuple) -> None:
        uid, low, high = (int(x) for x in n)
        if core.is_leaf(uid) or core.flag_of(uid):
            raise PreconditionError(f"node uid {uid:#x} must be an unflagged internal node")
        if self._last is not None and not uid < self._last:
            raise PreconditionError(
                f"nodes must be pushed in descending order: {core.decode(uid)} "
                f"after {core.decode(self._last)}")
        label = core.label_of(uid)
        for child in (low, high):
            if core.is_leaf(child):
                if child not in (core.TRUE, core.FALSE):
                    raise IntegrityError(f"invalid leaf child {child:#x}")
            elif child not in self._seen or core.label_of(child) <= label:
                raise IntegrityError(
                    f"child {core.decode(child)} of {core.decode(uid)} is not a previously "
                    "written node on a deeper level")
        self._track_canonical(uid, low, high, label)
        self._seen.add(uid)
        self._unreferenced.discard(low)
        self._unreferenced.discard(high)
        self._unreferenced.add(uid)
        self._last = uid
        self._rows.append((uid, low, high))
        if len(self._rows) >= 4096:
            self._spill_rows()

    def _track_canonical(self, uid: int, low: int, high: int, label: int) -> None:
        ident = core.id_of(uid)
        if not self._levels or self._levels[-1][0] != label:
            self._levels.append([label, 0])
            self._prev_children = None
            self._level_children = set()
            if ident != core.MAX_ID:
                self._canonical = False
        else:
            if ident != core.id_of(self._last) - 1:
                self._canonical = False
        self._levels[-1][1] += 1
        if low == high or (low, high) in self._level_children:
            self._canonical = False
            self._reduced = False
        self._level_children.add((low, high))
        if self._prev_children is not None and not (low, high) < self._prev_children:
            self._canonical = False
        self._prev_children = (low, high)

    def _spill_rows(self) -> None:
        self._w.append(np.asarray(self._rows, dtype=_DT))
        self._rows = []

    def push_level(self, uids: np.ndarray, lows: np.ndarray, highs: np.ndarray) -> None:
        """Bulk append of one level, already in descending order (used by Reduce)."""
        if not len(uids):
            return
        self._spill_rows()
        first = int(uids[0])
        if self._last is not None and not first < self._last:
            raise PreconditionError(
                f"nodes must be pushed in descending order: {core.decode(first)} "
                f"after {core.decode(self._last)}")
        label = core.label_of(first)
        self._levels.append([label, len(uids)])
        self._last = int(uids[-1])
        self._w.append(np.stack([uids, lows, highs], axis=1))

    def close(self, canonical: Optional[bool] = None) -> NodeFile:
        """Finish the file; ``canonical`` overrides the writer's own verdict."""
        self._spill_rows()
        if self._last is None:
            raise PreconditionError("an empty node file must be written with write_leaf")
        # reducedness also needs every node reachable from the single root
        single_root = len(self._unreferenced) == 1
        if canonical is None:
            canonical = self._canonical and single_root
            reduced = self._reduced and single_root
        else:
            reduced = canonical or (self._reduced and single_root)
        levels = [LevelInfo(l, c) for l, c in reversed(self._levels)]
        self._w.flags = (FLAG_CANONICAL if canonical else 0) | (FLAG_REDUCED if reduced else 0)
        self._w.close(levels)
        return NodeFile(self.store, self._w.path,
                        NodeMeta(self._w.count, levels, canonical, None, reduced))

    def abort(self) -> None:
        self._w.abort()


class ArcFiles(FileHandle):
    """The two arc files produced by Apply-like sweeps.

    ``internal`` holds arcs between internal nodes sorted by target;
    ``leaf`` holds node-to-leaf arcs sorted by source (unless
    ``needs_sorting``).  Level tables count internal arcs per target level and
    leaf arcs per source level.
    """

    def __init__(self, store: TempStore, internal: str, leaf: str,
                 internal_levels: list[LevelInfo], leaf_levels: list[LevelInfo],
                 node_levels: list[LevelInfo], needs_sorting: bool = False):
        super().__init__(store, [internal, leaf])
        self.internal_path = internal
        self.leaf_path = leaf
        self.internal_levels = internal_levels
        self.leaf_levels = leaf_levels
        self.node_levels = node_levels
        self.needs_sorting = needs_sorting

    @property
    def internal_count(self) -> int:
        return sum(c for _, c in self.internal_levels)

    @property
    def leaf_count(self) -> int:
        return sum(c for _, c in self.leaf_levels)

    @property
    def node_count(self) -> int:
        """Nodes of the unreduced OBDD: every node owns exactly two out-arcs."""
        return sum(c for _, c in self.node_levels)

    def labels(self) -> list[int]:
        return [l for l, _ in self.node_levels]

    def internal_reader(self, reverse: bool = False) -> "RecordReader":
        return RecordReader(self.store, self.internal_path, reverse=reverse, record=ArcRecord)

    def leaf_reader(self, reverse: bool = False) -> "RecordReader":
        return RecordReader(self.store, self.leaf_path, reverse=reverse, record=ArcRecord)


class ArcWriter:
    """Writes the internal/leaf arc file pair of one sweep.

    Per-level counters are kept in dicts since a sweep that bridges levels
    (Restrict) emits leaf arcs out of level order.
    """

    def __init__(self, store: TempStore):
        self.store = store
        stem = store.new_stem()
        self.internal = RecordWriter(store, stem + ".arcs", KIND_INTERNAL_ARCS, 2)
        self.leaf = RecordWriter(store, stem + ".leaf.arcs", KIND_LEAF_ARCS, 2)
        self._int_levels: dict[int, int] = {}
        self._leaf_levels: dict[int, int] = {}
        self._node_levels: dict[int, int] = {}
        self.needs_sorting = False

    def push_nodes(self, label: int, count: int) -> None:
        """Record that ``count`` nodes were created on level ``label``."""
        if count:
            self._node_levels[label] = self._node_levels.get(label, 0) + count

    def push_internal(self, sources: np.ndarray, targets: np.ndarray, target_label: int) -> None:
        if len(sources):
            self.internal.append(np.stack([sources, targets], axis=1))
            self._int_levels[target_label] = self._int_levels.get(target_label, 0) + len(sources)

    def push_leaf(self, sources: np.ndarray, targets: np.ndarray) -> None:
        if not len(sources):
            return
        self.leaf.append(np.stack([sources, targets], axis=1))
        labs, counts = np.unique(core.labels(np.asarray(sources, dtype=_DT)), return_counts=True)
        for l, c in zip(labs.tolist(), counts.tolist()):
            self._leaf_levels[l] = self._leaf_levels.get(l, 0) + c

    def close(self) -> ArcFiles:
        il = [LevelInfo(l, c) for l, c in sorted(self._int_levels.items())]
        ll = [LevelInfo(l, c) for l, c in sorted(self._leaf_levels.items())]
        nl = [LevelInfo(l, c) for l, c in sorted(self._node_levels.items())]
        total = sum(c for _, c in il) + sum(c for _, c in ll)
        if total != 2 * sum(c for _, c in nl):
            raise IntegrityError(
                f"{total} arcs written for {sum(c for _, c in nl)} nodes; expected two per node")
        if self.needs_sorting:
            self.leaf.flags |= FLAG_NEEDS_SORTING
        self.internal.close(il, nl)
        self.leaf.close(ll)
        return ArcFiles(self.store, self.internal.path, self.leaf.path, il, ll, nl,
                        self.needs_sorting)

    def abort(self) -> None:
        self.internal.abort()
        self.leaf.abort()


# -- reading -------------------------------------------------------------


class RecordReader:
    """Block-buffered forward or reverse reader with peek.

    ``next``/``peek`` hand out single records (as ``record`` tuples); ``take``
    and ``skip`` work on whole runs of records and return uint64 arrays in
    reading order.
    """

    def __init__(self, store: TempStore, path: str, reverse: bool = False, record=None):
        self.store = store
        self.path = path
        self.reverse = reverse
        self._record = record
        with open(path, "rb") as f:
            self.header = Header.unpack(f.read(HEADER_SIZE), path)
        store.io.blocks_read += 1
        store.io.bytes_read += HEADER_SIZE
        self.width = self.header.width
        self.total = self.header.count
        self._block = store.block_records(self.width)
        self._f = open(path, "rb")
        # rows not yet loaded: [_lo, _hi) in file order
        self._lo = 0
        self._hi = self.total
        self._buf = np.empty((0, self.width), dtype=_DT)
        self._pos = 0

    def close(self) -> None:
        if not self._f.closed:
            self._f.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass

    def remaining(self) -> int:
        return (self._hi - self._lo) + (len(self._buf) - self._pos)

    def has_next(self) -> bool:
        return self.remaining() > 0

    def _load(self) -> bool:
        if self._lo >= self._hi:
            return False
        n = min(self._block, self._hi - self._lo)
        if self.reverse:
            start = self._hi - n
            self._hi = start
        else:
            start = self._lo
            self._lo += n
        self._f.seek(HEADER_SIZE + 8 * self.width * start)
        data = np.fromfile(self._f, dtype=_DT, count=n * self.width)
        if len(data) != n * self.width:
            raise IntegrityError(f"{self.path}: short read")
        self.store.io.blocks_read += 1
        self.store.io.bytes_read += data.nbytes
        data = data.reshape(n, self.width)
        self._buf = data[::-1] if self.reverse else data
        self._pos = 0
        return True

    def _ensure(self) -> None:
        if self._pos >= len(self._buf) and not self._load():
            raise EndOfStream(f"{self.path}: end of stream")

    def peek(self):
        self._ensure()
        row = self._buf[self._pos]
        return self._wrap(row)

    def next(self):
        self._ensure()
        row = self._buf[self._pos]
        self._pos += 1
        return self._wrap(row)

    __next__ = next

    def __iter__(self) -> Iterator:
        while self.has_next():
            yield self.next()

    def _wrap(self, row):
        vals = tuple(int(x) for x in row)
        return self._record(*vals) if self._record is not None else vals

    def take(self, n: int) -> np.ndarray:
        """The next ``n`` records as an (n, width) array in reading order."""
        if n > self.remaining():
            raise EndOfStream(f"{self.path}: {n} records requested, {self.remaining()} left")
        parts = []
        while n > 0:
            self._ensure()
            k = min(n, len(self._buf) - self._pos)
            parts.append(self._buf[self._pos:self._pos + k])
            self._pos += k
            n -= k
        if not parts:
            return np.empty((0, self.width), dtype=_DT)
        return parts[0] if len(parts) == 1 else np.concatenate(parts)

    def skip(self, n: int) -> None:
        in_buf = len(self._buf) - self._pos
        if n <= in_buf:
            self._pos += n
            return
        n -= in_buf
        self._pos = len(self._buf)
        if n > self._hi - self._lo:
            raise EndOfStream(f"{self.path}: cannot skip past the end")
        if self.reverse:
            self._hi -= n
        else:
            self._lo += n

    def read_all(self) -> np.ndarray:
        return self.take(self.remaining())


class LevelCursor:
    """Top-down level access to a node file, optionally negating leaves."""

    def __init__(self, nf: NodeFile, negate: bool = False):
        self.levels = list(nf.meta.levels)
        self._i = 0
        self._negate = negate
        self._reader = None if nf.is_leaf else nf.reader(reverse=True)

    def level(self, label: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Nodes (uid, low, high) on ``label``, skipping shallower levels."""
        while self._i < len(self.levels) and self.levels[self._i].label < label:
            self._reader.skip(self.levels[self._i].count)
            self._i += 1
        if self._i < len(self.levels) and self.levels[self._i].label == label:
            rows = self._reader.take(self.levels[self._i].count)
            self._i += 1
            low, high = rows[:, 1], rows[:, 2]
            if self._negate:
                low, high = core.negate_leaves(low), core.negate_leaves(high)
            return np.ascontiguousarray(rows[:, 0]), np.ascontiguousarray(low), np.ascontiguousarray(high)
        empty = np.empty(0, dtype=_DT)
        return empty, empty, empty

    def close(self) -> None:
        if self._reader is not None:
            self._reader.close()
