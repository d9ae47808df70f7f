"""Package lifecycle and handle types.

A single manager owns the temp directory, the memory budget and the
bookkeeping of live files.  ``init`` must precede every other call and
``deinit`` tears everything down; it refuses to do so while handles are
still alive.
"""
from __future__ import annotations

import logging
import os
import shutil
import tempfile
import threading
import weakref
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import ConfigurationError, StateError
from .streams import DEFAULT_BLOCK_BYTES, ArcFiles, NodeFile, TempStore

logger = logging.getLogger(__name__)

MiB = 1 << 20
MIN_MEMORY = 64 * MiB
TEMP_ENV = "EXTBDD_TEMP_DIR"


@dataclass
class ManagerConfig:
    """Memory budget, temp directory and queue/stream tuning.

    The budget covers priority queues, sorters and stream buffers alike and
    is split according to the three ``*_share`` fractions.  ``temp_dir``
    falls back to ``$EXTBDD_TEMP_DIR`` and then to a fresh directory under the
    system temp location.
    """

    memory_bytes: int = 512 * MiB
    temp_dir: Optional[str] = None
    k: int = 4
    block_bytes: int = DEFAULT_BLOCK_BYTES
    pq_share: float = 0.5
    sorter_share: float = 0.25
    stream_share: float = 0.25

    def validate(self) -> None:
        if self.memory_bytes < MIN_MEMORY:
            raise ConfigurationError(
                f"memory budget of {self.memory_bytes} bytes is below the "
                f"{MIN_MEMORY // MiB} MiB floor")
        if not 1 <= self.k <= 64:
            raise ConfigurationError(f"bucket count k={self.k} outside 1..64")
        if self.block_bytes < 4096:
            raise ConfigurationError("block size below 4 KiB")
        shares = (self.pq_share, self.sorter_share, self.stream_share)
        if min(shares) <= 0 or abs(sum(shares) - 1.0) > 1e-9:
            raise ConfigurationError("memory shares must be positive and sum to 1")
        if self.sorter_share * self.memory_bytes < 3 * self.block_bytes:
            raise ConfigurationError("sorter share is below three blocks")


class Manager:
    def __init__(self, cfg: ManagerConfig):
        cfg.validate()
        self.config = cfg
        temp = cfg.temp_dir or os.environ.get(TEMP_ENV)
        self._owns_dir = temp is None
        if temp is None:
            temp = tempfile.mkdtemp(prefix="extbdd-")
        else:
            os.makedirs(temp, exist_ok=True)
        if not os.access(temp, os.W_OK):
            raise OSError(f"temp directory {temp} is not writable")
        self.temp_dir = os.path.abspath(temp)
        self.store = TempStore(self.temp_dir, cfg.block_bytes)
        self.k = cfg.k
        self.pq_bytes = int(cfg.memory_bytes * cfg.pq_share)
        self.sorter_bytes = int(cfg.memory_bytes * cfg.sorter_share)
        self.stream_bytes = int(cfg.memory_bytes * cfg.stream_share)
        self.hooks: list[Callable] = []
        self.peak_pq_bytes = 0
        self.peak_sorter_bytes = 0
        self._handles: dict[int, weakref.ref] = {}
        self._lock = threading.Lock()
        self.alive = True

    # -- instrumentation --

    def add_hook(self, fn: Callable) -> None:
        """Register ``fn(event, stats)``; events are "apply" and "reduce"."""
        self.hooks.append(fn)

    def remove_hook(self, fn: Callable) -> None:
        self.hooks.remove(fn)

    def emit(self, event: str, stats) -> None:
        for fn in list(self.hooks):
            fn(event, stats)

    def note_pq(self, pq) -> None:
        self.peak_pq_bytes = max(self.peak_pq_bytes, pq.memory.peak)

    def note_sorter(self, sorter) -> None:
        self.peak_sorter_bytes = max(self.peak_sorter_bytes, sorter.memory.peak)

    # -- bookkeeping --

    def _track(self, h) -> None:
        key = id(h)

        def gone(_ref, key=key, handles=self._handles):
            handles.pop(key, None)

        with self._lock:
            self._handles[key] = weakref.ref(h, gone)

    def live_handle_count(self) -> int:
        with self._lock:
            refs = list(self._handles.values())
        return sum(1 for r in refs if (h := r()) is not None and h._live)

    def live_files(self) -> list[str]:
        return self.store.live_paths()

    def census(self) -> list[str]:
        """Files currently present in the temp directory."""
        return sorted(os.listdir(self.temp_dir))

    def shutdown(self) -> None:
        n = self.live_handle_count()
        if n:
            raise StateError(f"deinit with {n} live handle(s)")
        for fh in self.store.live_handles():
            fh.delete()
        for name in os.listdir(self.temp_dir):
            p = os.path.join(self.temp_dir, name)
            if os.path.isdir(p):
                shutil.rmtree(p, ignore_errors=True)
            else:
                os.remove(p)
        if self._owns_dir:
            shutil.rmtree(self.temp_dir, ignore_errors=True)
        self.alive = False


_current: Optional[Manager] = None
_glock = threading.Lock()


def init(cfg: Optional[ManagerConfig] = None, **kw) -> Manager:
    """Start the package; keyword arguments are ManagerConfig fields."""
    global _current
    if cfg is None:
        cfg = ManagerConfig(**kw)
    elif kw:
        raise TypeError("pass either a ManagerConfig or keyword arguments")
    with _glock:
        if _current is not None:
            raise StateError("the package is already initialised")
        _current = Manager(cfg)
        return _current


def deinit() -> None:
    global _current
    with _glock:
        if _current is None:
            raise StateError("the package is not initialised")
        _current.shutdown()
        _current = None


def current() -> Manager:
    m = _current
    if m is None:
        raise StateError("the package is not initialised; call init() first")
    return m


def is_initialised() -> bool:
    return _current is not None


class BddHandle:
    """A reduced BDD: a shared node file plus a negation flag.

    Handles are immutable; negation produces a new handle over the same file.
    """

    __slots__ = ("file", "negated", "_mgr", "_live", "__weakref__")

    def __init__(self, file: NodeFile, negated: bool = False):
        self._mgr = current()
        self.file = file
        self.negated = bool(negated)
        file.acquire()
        self._live = True
        self._mgr._track(self)

    @property
    def canonical(self) -> bool:
        return self.file.meta.canonical

    @property
    def is_leaf(self) -> bool:
        return self.file.is_leaf

    @property
    def leaf_value(self) -> Optional[bool]:
        v = self.file.meta.leaf_value
        if v is None:
            return None
        return v != self.negated

    def check(self) -> "BddHandle":
        if not self._live:
            raise StateError("handle has been released")
        if self._mgr is not _current or not self._mgr.alive:
            raise StateError("handle belongs to a manager that has been shut down")
        return self

    def release(self) -> None:
        """Drop this handle's reference to its file (idempotent)."""
        if self._live:
            self._live = False
            if self._mgr.alive:
                self.file.release()

    def __del__(self):
        try:
            self.release()
        except Exception:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.release()

    # operators route through the ops module
    def __and__(self, other):
        from . import ops
        return ops.bdd_and(self, other)

    def __or__(self, other):
        from . import ops
        return ops.bdd_or(self, other)

    def __xor__(self, other):
        from . import ops
        return ops.bdd_xor(self, other)

    def __invert__(self):
        from . import ops
        return ops.bdd_not(self)

    def __sub__(self, other):
        from . import ops
        return ops.bdd_diff(self, other)

    def __eq__(self, other):
        if not isinstance(other, BddHandle):
            return NotImplemented
        from . import ops
        return ops.bdd_equal(self, other)

    def __ne__(self, other):
        r = self.__eq__(other)
        return r if r is NotImplemented else not r

    __hash__ = None

    def __repr__(self):
        m = self.file.meta
        if self.is_leaf:
            return f"BddHandle(leaf={self.leaf_value})"
        return f"BddHandle(nodes={m.count}, levels={m.varcount}, negated={self.negated})"


class UnreducedHandle:
    """Output of a sweep awaiting Reduce; converts to a BddHandle exactly once."""

    __slots__ = ("arcs", "_ready", "_mgr", "_live", "stats", "__weakref__")

    def __init__(self, arcs: Optional[ArcFiles] = None, ready: Optional[BddHandle] = None,
                 stats=None):
        if (arcs is None) == (ready is None):
            raise ValueError("exactly one of arcs / ready is required")
        self._mgr = current()
        self.arcs = arcs
        self._ready = ready
        self.stats = stats
        if arcs is not None:
            arcs.acquire()
        self._live = True
        self._mgr._track(self)

    def to_reduced(self) -> BddHandle:
        if not self._live:
            raise StateError("unreduced handle has already been converted")
        self._live = False
        if self._ready is not None:
            out, self._ready = self._ready, None
            return out
        from .reduce import reduce_arcs
        arcs, self.arcs = self.arcs, None
        try:
            nf, stats = reduce_arcs(self._mgr, arcs)
        finally:
            arcs.release()
        self._mgr.emit("reduce", stats)
        return BddHandle(nf)

    def release(self) -> None:
        if self._live:
            self._live = False
            if self.arcs is not None and self._mgr.alive:
                self.arcs.release()
                self.arcs = None
            if self._ready is not None:
                self._ready.release()
                self._ready = None

    def __del__(self):
        try:
            self.release()
        except Exception:
            pass


def reduced(h) -> BddHandle:
    """Coerce a BddHandle or UnreducedHandle into a BddHandle."""
    if isinstance(h, UnreducedHandle):
        return h.to_reduced()
    if isinstance(h, BddHandle):
        return h.check()
    raise TypeError(f"expected a BDD handle, got {type(h).__name__}")
