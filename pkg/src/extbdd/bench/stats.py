"""Run statistics gathered through the manager's apply/reduce hooks."""
from __future__ import annotations

import statistics
import time
from dataclasses import asdict, dataclass, field
from typing import Any


@dataclass
class RunStats:
    """Sizes of every unreduced Apply output in a run, plus wall time.

    ``median_unreduced`` is the median over all Apply outputs of the run.
    ``leaf_arc_ratio`` is taken over the arcs of all those outputs together.
    """

    benchmark: str
    n: Any
    result: Any = None
    applies: int = 0
    largest_unreduced: int = 0
    median_unreduced: float = 0.0
    leaf_arc_ratio: float = 0.0
    wall_ms: float = 0.0
    sizes: list = field(default_factory=list, repr=False)
    arcs: list = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        d = asdict(self)
        d.pop("sizes")
        d.pop("arcs")
        d.pop("applies")
        return d


class StatsCollector:
    """Context manager that hooks into the manager and fills a RunStats."""

    def __init__(self, mgr, benchmark: str, n):
        self.mgr = mgr
        self.stats = RunStats(benchmark, n)
        self._leaf = 0
        self._arcs = 0
        self._t0 = 0.0

    def __call__(self, event: str, st) -> None:
        if event != "apply":
            return
        self.stats.sizes.append(st.nodes)
        self.stats.arcs.append(st.leaf_arcs + st.internal_arcs)
        self._leaf += st.leaf_arcs
        self._arcs += st.leaf_arcs + st.internal_arcs

    def __enter__(self) -> RunStats:
        self.mgr.add_hook(self)
        self._t0 = time.perf_counter()
        return self.stats

    def __exit__(self, *exc):
        s = self.stats
        s.wall_ms = (time.perf_counter() - self._t0) * 1000.0
        self.mgr.remove_hook(self)
        s.applies = len(s.sizes)
        if s.sizes:
            s.largest_unreduced = max(s.sizes)
            s.median_unreduced = float(statistics.median(s.sizes))
        s.leaf_arc_ratio = self._leaf / self._arcs if self._arcs else 0.0
