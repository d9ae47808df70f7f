"""Combinational equivalence of two BLIF netlists, one BDD per gate.

Gate BDDs are built bottom-up in topological order.  Every gate carries a
reference count (its fan-outs, plus one if it is an output); once the last
reader has consumed it the handle is released so its file can go.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .. import ops
from ..errors import PreconditionError
from ..manager import current
from .blif import BlifNetlist, read_blif
from .stats import RunStats, StatsCollector

logger = logging.getLogger(__name__)

ORDERS = ("input", "level-dfs")


def variable_order(spec: BlifNetlist, impl: BlifNetlist, order: str = "input") -> dict[str, int]:
    """Map input names to variable indices.

    ``input`` keeps the declaration order of the specification.  ``level-dfs``
    sorts inputs by the depth of their deepest reference in the optimised
    netlist (deepest first), breaking ties by first visit in a depth-first
    walk from its outputs.
    """
    if order == "input":
        names = list(spec.inputs)
    elif order == "level-dfs":
        depth = impl.depths()
        deepest = {i: 0 for i in impl.inputs}
        for g in impl.gates.values():
            for f in g.fanins:
                if f in deepest:
                    deepest[f] = max(deepest[f], depth[g.name])
        seen: dict[str, int] = {}
        visited = set()
        for o in impl.outputs:
            stack = [o]
            while stack:
                x = stack.pop()
                if x in visited:
                    continue
                visited.add(x)
                if x in deepest:
                    seen.setdefault(x, len(seen))
                    continue
                stack.extend(reversed(impl.gates[x].fanins))
        for i in impl.inputs:
            seen.setdefault(i, len(seen))
        names = sorted(impl.inputs, key=lambda i: (-deepest[i], seen[i]))
    else:
        raise PreconditionError(f"unknown variable order {order!r}; expected one of {ORDERS}")
    return {n: k for k, n in enumerate(names)}


def _cover(gate, fanins: list):
    """BDD of a gate's cover given its fan-in BDDs."""
    acc = None
    for row in gate.rows:
        term = None
        for c, f in zip(row, fanins):
            if c == "-":
                continue
            lit = ops._copy(f) if c == "1" else ops.bdd_not(f)
            if term is None:
                term = lit
            else:
                nxt = ops.bdd_and(term, lit)
                term.release()
                lit.release()
                term = nxt
        if term is None:
            term = ops.bdd_true()
        if acc is None:
            acc = term
        else:
            nxt = ops.bdd_or(acc, term)
            acc.release()
            term.release()
            acc = nxt
    if acc is None:
        acc = ops.bdd_false()
    if gate.value == "0":
        neg = ops.bdd_not(acc)
        acc.release()
        acc = neg
    return acc


def build_outputs(net: BlifNetlist, var_of: dict[str, int]) -> dict:
    """Handles for every output of ``net``; intermediate handles are released."""
    refs: dict[str, int] = {}
    for g in net.gates.values():
        for f in g.fanins:
            refs[f] = refs.get(f, 0) + 1
    for o in net.outputs:
        refs[o] = refs.get(o, 0) + 1
    memo: dict = {}

    def get(name):
        h = memo.get(name)
        if h is None:
            h = memo[name] = ops.bdd_ithvar(var_of[name])
        return h

    def done(name):
        refs[name] -= 1
        if refs[name] == 0:
            memo.pop(name).release()

    outs = {}
    try:
        for g in net.topological():
            gate = net.gates[g]
            fan = [get(f) for f in gate.fanins]
            memo[g] = _cover(gate, fan)
            for f in gate.fanins:
                done(f)
        for o in net.outputs:
            outs[o] = ops._copy(get(o))
            done(o)
    except BaseException:
        for h in list(memo.values()) + list(outs.values()):
            h.release()
        raise
    return outs


@dataclass
class PicotravResult:
    equal: bool
    outputs: dict = field(default_factory=dict)


def picotrav(spec, impl, order: str = "input") -> tuple[PicotravResult, RunStats]:
    """Check each output of ``impl`` against the same output of ``spec``.

    ``spec`` and ``impl`` are netlists or BLIF paths.
    """
    if isinstance(spec, str):
        spec = read_blif(spec)
    if isinstance(impl, str):
        impl = read_blif(impl)
    if set(spec.inputs) != set(impl.inputs):
        raise PreconditionError("the netlists have different input names")
    if set(spec.outputs) != set(impl.outputs):
        raise PreconditionError("the netlists have different output names")
    var_of = variable_order(spec, impl, order)
    mgr = current()
    with StatsCollector(mgr, "picotrav", f"{spec.model}/{impl.model}") as st:
        a = build_outputs(spec, var_of)
        b = build_outputs(impl, var_of)
        verdicts = {}
        for o in spec.outputs:
            verdicts[o] = ops.bdd_equal(a[o], b[o])
            a[o].release()
            b[o].release()
    res = PicotravResult(all(verdicts.values()), verdicts)
    st.result = res.equal
    return res, st
