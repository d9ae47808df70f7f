"""The public BDD operations.

Every function takes and returns handles from :mod:`extbdd.manager`; inputs
may also be unreduced handles, which are reduced on the spot.  Operations
that build a new diagram run a top-down sweep followed by Reduce.
"""
from __future__ import annotations

import logging
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from . import core
from . import operators as O
from .apply import apply_files
from .core import FALSE, MAX_ID, NIL, TRUE
from .errors import PreconditionError
from .extmem import LevelizedPQ
from .manager import BddHandle, UnreducedHandle, current, reduced
from .operators import BooleanOperator
from .streams import LevelCursor, NodeFile, NodeWriter, write_leaf
from .sweep import LevelView, is_leaf, min_label, product_sweep

logger = logging.getLogger(__name__)

_DT = np.dtype("<u8")

Handle = Union[BddHandle, UnreducedHandle]
AssignmentLike = Union[Mapping[int, bool], Sequence[tuple[int, bool]]]


def _leaf(v: bool) -> int:
    return TRUE if v else FALSE


def _from_sweep(res) -> BddHandle:
    if res.arcs is None:
        return bdd_sink(res.leaf)
    return UnreducedHandle(arcs=res.arcs).to_reduced()


def _copy(h: BddHandle, negated: Optional[bool] = None) -> BddHandle:
    return BddHandle(h.file, h.negated if negated is None else negated)


# -- constructors -----------------------------------------------------------


def bdd_sink(value: bool) -> BddHandle:
    """The constant function ``value``."""
    return BddHandle(write_leaf(current().store, bool(value)))


def bdd_true() -> BddHandle:
    return bdd_sink(True)


def bdd_false() -> BddHandle:
    return bdd_sink(False)


def _check_label(i: int) -> int:
    i = int(i)
    if not 0 <= i <= core.MAX_LABEL:
        raise core_range_error(i)
    return i


def core_range_error(i):
    from .errors import CapacityError
    return CapacityError(f"variable {i} outside [0, {core.MAX_LABEL}]")


def bdd_ithvar(i: int) -> BddHandle:
    """The function x_i."""
    i = _check_label(i)
    w = NodeWriter(current().store)
    w.push((core.encode_node(i, MAX_ID), FALSE, TRUE))
    return BddHandle(w.close())


def bdd_nithvar(i: int) -> BddHandle:
    """The function not x_i."""
    i = _check_label(i)
    w = NodeWriter(current().store)
    w.push((core.encode_node(i, MAX_ID), TRUE, FALSE))
    return BddHandle(w.close())


def build(root, nodes: Mapping) -> BddHandle:
    """Write a small diagram given as ``key -> (label, low, high)``.

    Children are keys or booleans.  The result is reduced and canonical, so
    the description need not be (redundant and duplicate nodes are fine).
    This is the in-memory helper behind the chain and lattice constructors.
    """
    if isinstance(root, bool):
        return bdd_sink(root)
    by_label: dict[int, list] = {}
    for key, (label, lo, hi) in nodes.items():
        by_label.setdefault(_check_label(label), []).append(key)
    uid_of: dict = {}

    def ref(c):
        if isinstance(c, (bool, np.bool_)):
            return _leaf(bool(c))
        return uid_of[c]

    w = None
    for label in sorted(by_label, reverse=True):
        pairs: dict[tuple[int, int], list] = {}
        for key in by_label[label]:
            _, lo, hi = nodes[key]
            lo_u, hi_u = ref(lo), ref(hi)
            if core.label_of(lo_u) <= label and not core.is_leaf(lo_u) or \
                    core.label_of(hi_u) <= label and not core.is_leaf(hi_u):
                raise PreconditionError(f"node {key!r} has a child on a level not below {label}")
            if lo_u == hi_u:
                uid_of[key] = lo_u
            else:
                pairs.setdefault((lo_u, hi_u), []).append(key)
        for k, pair in enumerate(sorted(pairs, reverse=True)):
            uid = core.encode_node(label, MAX_ID - k)
            for key in pairs[pair]:
                uid_of[key] = uid
            if w is None:
                w = NodeWriter(current().store)
            w.push((uid, pair[0], pair[1]))
    r = ref(root)
    if core.is_leaf(r):
        if w is not None:
            w.abort()
        return bdd_sink(core.value_of(r))
    # drop nodes that became unreachable (e.g. under a redundant root)
    nf = w.close()
    h = BddHandle(nf)
    if not nf.meta.reduced or core.strip_flag(nf.root()) != r:
        return _normalise(h, root_uid=r)
    return h


def _ascending(vars: Iterable[int]) -> list[int]:
    vs = [int(v) for v in vars]
    if any(b <= a for a, b in zip(vs, vs[1:])):
        raise PreconditionError(f"variables must be strictly ascending: {vs}")
    for v in vs:
        _check_label(v)
    return vs


def bdd_and_vars(vars: Iterable[int]) -> BddHandle:
    """Conjunction of the given (ascending) variables; empty gives true."""
    vs = _ascending(vars)
    nodes = {}
    nxt: object = True
    for v in reversed(vs):
        nodes[v] = (v, False, nxt)
        nxt = v
    return build(nxt, nodes)


def bdd_or_vars(vars: Iterable[int]) -> BddHandle:
    """Disjunction of the given (ascending) variables; empty gives false."""
    vs = _ascending(vars)
    nodes = {}
    nxt: object = False
    for v in reversed(vs):
        nodes[v] = (v, nxt, True)
        nxt = v
    return build(nxt, nodes)


def bdd_counter(i: int, j: int, t: int) -> BddHandle:
    """True iff exactly ``t`` of the variables x_i .. x_j are true."""
    i, j, t = int(i), int(j), int(t)
    if i > j:
        raise PreconditionError(f"empty variable range {i}..{j}")
    if not 0 <= t <= j - i + 1:
        raise PreconditionError(f"threshold {t} outside 0..{j - i + 1}")
    _check_label(j)

    def state(k, c):
        if c > t or c + (j - k + 1) < t:
            return False
        if k > j:
            return c == t
        return (k, c)

    nodes = {}
    for k in range(i, j + 1):
        for c in range(0, min(t, k - i) + 1):
            if state(k, c) is not False:
                nodes[(k, c)] = (k, state(k + 1, c), state(k + 1, c + 1))
    return build(state(i, 0), nodes)


def _normalise(h: BddHandle, root_uid: Optional[int] = None) -> BddHandle:
    """Re-derive a reduced, canonical copy of a (possibly unreduced) file."""
    root = h.file.root() if root_uid is None else root_uid

    def resolve(t, view: LevelView):
        lo, hi = view.children(0, t[0])
        return "node", _t1(lo), _t1(hi)

    res = product_sweep(current(), [(h.file, h.negated)], (root,), resolve)
    out = _from_sweep(res)
    h.release()
    return out


def _t1(u: int):
    return u if core.is_leaf(u) else (u,)


# -- negation and apply --------------------------------------------------------


def bdd_not(f: Handle) -> BddHandle:
    """Negation: the same file under the opposite negation flag (no I/O)."""
    f = reduced(f)
    return BddHandle(f.file, not f.negated)


def _unary(op: BooleanOperator, leaf_value: bool, other: BddHandle, leaf_left: bool):
    """Apply with one leaf operand: a constant, the other operand or its negation."""
    if leaf_left:
        r0, r1 = op(leaf_value, False), op(leaf_value, True)
    else:
        r0, r1 = op(False, leaf_value), op(True, leaf_value)
    if r0 == r1:
        return bdd_sink(r0)
    return _copy(other, other.negated if (r0, r1) == (False, True) else not other.negated)


def bdd_apply(f: Handle, g: Handle, op: Union[BooleanOperator, str, Sequence[int]],
              prune: bool = True) -> UnreducedHandle:
    """Product construction of ``f op g``; the result still needs Reduce."""
    f, g = reduced(f), reduced(g)
    if isinstance(op, str):
        op = O.BY_NAME[op]
    elif not isinstance(op, BooleanOperator):
        op = O.by_table(op)
    if f.is_leaf and g.is_leaf:
        return UnreducedHandle(ready=bdd_sink(op(f.leaf_value, g.leaf_value)))
    if f.is_leaf:
        return UnreducedHandle(ready=_unary(op, f.leaf_value, g, True))
    if g.is_leaf:
        return UnreducedHandle(ready=_unary(op, g.leaf_value, f, False))
    ctx = current()
    arcs, stats = apply_files(ctx, f.file, f.negated, g.file, g.negated, op, prune)
    ctx.emit("apply", stats)
    return UnreducedHandle(arcs=arcs, stats=stats)


def apply_reduced(f: Handle, g: Handle, op, prune: bool = True) -> BddHandle:
    return bdd_apply(f, g, op, prune).to_reduced()


def _binary(op: BooleanOperator):
    def fn(f: Handle, g: Handle, prune: bool = True) -> BddHandle:
        return apply_reduced(f, g, op, prune)
    fn.__name__ = f"bdd_{op.name}"
    fn.__doc__ = f"``f {op.name} g``, reduced."
    return fn


def bdd_and(f, g=None, prune: bool = True) -> BddHandle:
    """``f and g``; with a single list of variables, their conjunction."""
    if g is None and not isinstance(f, (BddHandle, UnreducedHandle)):
        return bdd_and_vars(f)
    return apply_reduced(f, g, O.AND, prune)


def bdd_or(f, g=None, prune: bool = True) -> BddHandle:
    """``f or g``; with a single list of variables, their disjunction."""
    if g is None and not isinstance(f, (BddHandle, UnreducedHandle)):
        return bdd_or_vars(f)
    return apply_reduced(f, g, O.OR, prune)


bdd_xor = _binary(O.XOR)
bdd_nand = _binary(O.NAND)
bdd_nor = _binary(O.NOR)
bdd_xnor = _binary(O.XNOR)
bdd_equiv = bdd_xnor
bdd_imp = _binary(O.IMP)
bdd_invimp = _binary(O.IMP_REV)
bdd_diff = _binary(O.DIFF)
bdd_less = _binary(O.LESS)


# -- if-then-else ------------------------------------------------------------------


def _ite_norm(tf: int, tg: int, th: int, gh_same: bool = False):
    """Collapse a (condition, then, else) request as far as leaves allow.

    A request whose condition is decided keeps only the chosen branch, in its
    own slot, so the sweep still reads it from the right input.
    """
    if tf == NIL:
        t = tg if th == NIL else th
        return t if core.is_leaf(t) else (NIL, tg, th)
    if core.is_leaf(tf):
        if core.value_of(tf):
            return tg if core.is_leaf(tg) else (NIL, tg, NIL)
        return th if core.is_leaf(th) else (NIL, NIL, th)
    if tg == th and (gh_same or core.is_leaf(tg)):
        return tg if core.is_leaf(tg) else (NIL, tg, NIL)
    return (tf, tg, th)


def bdd_ite(f: Handle, g: Handle, h: Handle) -> BddHandle:
    """``f ? g : h``."""
    f, g, h = reduced(f), reduced(g), reduced(h)
    if f.is_leaf:
        return _copy(g if f.leaf_value else h)
    if g.is_leaf and h.is_leaf:
        if g.leaf_value == h.leaf_value:
            return bdd_sink(g.leaf_value)
        return _copy(f, f.negated if g.leaf_value else not f.negated)
    if g.file is h.file and g.negated == h.negated:
        return _copy(g)

    def root_of(x: BddHandle) -> int:
        return _leaf(x.leaf_value) if x.is_leaf else x.file.root()

    same = g.file is h.file and g.negated == h.negated

    def resolve(t, view: LevelView):
        lo = _ite_norm(*(view.cofactor(k, u, False) for k, u in enumerate(t)), same)
        hi = _ite_norm(*(view.cofactor(k, u, True) for k, u in enumerate(t)), same)
        return "node", lo, hi

    inputs = [(x.file, x.negated) for x in (f, g, h)]
    root = _ite_norm(root_of(f), root_of(g), root_of(h), same)
    return _from_sweep(product_sweep(current(), inputs, root, resolve))


# -- restrict ------------------------------------------------------------------------


def _assignment(a: AssignmentLike) -> dict[int, bool]:
    items = a.items() if isinstance(a, Mapping) else a
    out: dict[int, bool] = {}
    for v, b in items:
        v = int(v)
        if v in out:
            raise PreconditionError(f"variable {v} assigned twice")
        out[v] = bool(b)
    return out


def bdd_restrict(f: Handle, a: AssignmentLike) -> BddHandle:
    """``f`` with the variables of ``a`` fixed to the given values."""
    f = reduced(f)
    asg = _assignment(a)
    labels = {l for l, _ in f.file.meta.levels}
    asg = {v: b for v, b in asg.items() if v in labels}
    if f.is_leaf or not asg:
        return _copy(f)

    def resolve(t, view: LevelView):
        u = t[0]
        lo, hi = view.children(0, u)
        if view.label in asg:
            return "bridge", _t1(hi if asg[view.label] else lo)
        return "node", _t1(lo), _t1(hi)

    res = product_sweep(current(), [(f.file, f.negated)], (f.file.root(),), resolve)
    return _from_sweep(res)


# -- quantification ------------------------------------------------------------------


def _quant_norm(op: BooleanOperator, a: int, b: int):
    if a == b:
        return a if core.is_leaf(a) else (a, NIL)
    al, bl = core.is_leaf(a), core.is_leaf(b)
    if al and bl:
        return _leaf(op(core.value_of(a), core.value_of(b)))
    if al or bl:
        leaf, other = (a, b) if al else (b, a)
        v = core.value_of(leaf)
        if op.left_forces[v]:
            return _leaf(op(v, False))
        return (other, NIL)
    return (min(a, b), max(a, b))


def _quantify(f: Handle, var: int, op: BooleanOperator) -> BddHandle:
    f = reduced(f)
    var = int(var)
    if f.is_leaf or var not in {l for l, _ in f.file.meta.levels}:
        return _copy(f)

    def resolve(t, view: LevelView):
        a, b = t
        if b == NIL:
            lo, hi = view.children(0, a)
            if view.label == var:
                return "bridge", _quant_norm(op, lo, hi)
            return "node", _t1q(lo), _t1q(hi)
        a_lo, a_hi = view.cofactor(0, a, False), view.cofactor(0, a, True)
        b_lo, b_hi = view.cofactor(1, b, False), view.cofactor(1, b, True)
        return "node", _quant_norm(op, a_lo, b_lo), _quant_norm(op, a_hi, b_hi)

    inputs = [(f.file, f.negated), (f.file, f.negated)]
    res = product_sweep(current(), inputs, (f.file.root(), NIL), resolve)
    return _from_sweep(res)


def _t1q(u: int):
    return u if core.is_leaf(u) else (u, NIL)


def _vars(vs) -> list[int]:
    if isinstance(vs, (int, np.integer)):
        return [int(vs)]
    return [int(v) for v in vs]


def bdd_exists(f: Handle, vars) -> BddHandle:
    """Existential quantification of one variable or a list of them."""
    out = reduced(f)
    for v in _vars(vars):
        nxt = _quantify(out, v, O.OR)
        out = nxt
    return out


def bdd_forall(f: Handle, vars) -> BddHandle:
    """Universal quantification of one variable or a list of them."""
    out = reduced(f)
    for v in _vars(vars):
        out = _quantify(out, v, O.AND)
    return out


def bdd_quantify(kind: str, f: Handle, var: int) -> BddHandle:
    if kind == "exists":
        return bdd_exists(f, var)
    if kind == "forall":
        return bdd_forall(f, var)
    raise ValueError(f"unknown quantifier {kind!r}")


# -- composition ---------------------------------------------------------------------


def bdd_compose(f: Handle, var: int, g: Handle) -> BddHandle:
    """``f`` with x_var replaced by the function ``g``."""
    f, g = reduced(f), reduced(g)
    var = int(var)
    if f.is_leaf or var not in {l for l, _ in f.file.meta.levels}:
        return _copy(f)
    if g.is_leaf:
        return bdd_restrict(f, [(var, g.leaf_value)])

    def norm(tg, t1, t0):
        # (tg, t1, t0) stands for ite(g@tg, f@t1 | x_var=1, f@t0 | x_var=0)
        if tg != NIL and core.is_leaf(tg):
            if core.value_of(tg):
                t0 = NIL
            else:
                t1 = NIL
            tg = NIL
        if tg == NIL:
            t = t1 if t0 == NIL else t0
            return t if core.is_leaf(t) else (NIL, t1, t0)
        if t1 == t0 and (core.is_leaf(t1) or core.label_of(t1) > var):
            return t1 if core.is_leaf(t1) else (NIL, t1, NIL)
        return (tg, t1, t0)

    def resolve(t, view: LevelView):
        tg, t1, t0 = t
        if view.label == var:
            # the restricted copies of f skip this level
            t1 = view.cofactor(1, t1, True)
            t0 = view.cofactor(2, t0, False)
            r = norm(tg, t1, t0)
            if not isinstance(r, tuple) or min_label(r) > view.label:
                return "bridge", r
            tg, t1, t0 = r
        lo = norm(view.cofactor(0, tg, False), view.cofactor(1, t1, False), view.cofactor(2, t0, False))
        hi = norm(view.cofactor(0, tg, True), view.cofactor(1, t1, True), view.cofactor(2, t0, True))
        return "node", lo, hi

    inputs = [(g.file, g.negated), (f.file, f.negated), (f.file, f.negated)]
    rf = f.file.root()
    root = norm(g.file.root(), rf, rf)
    return _from_sweep(product_sweep(current(), inputs, root, resolve))


# -- counting ------------------------------------------------------------------------


def _limbs(values: list[int], k: int) -> np.ndarray:
    out = np.empty((len(values), k), dtype=_DT)
    mask = (1 << 64) - 1
    for i, v in enumerate(values):
        for j in range(k):
            out[i, j] = (v >> (64 * j)) & mask
    return out


def _unlimb(rows: np.ndarray) -> list[int]:
    k = rows.shape[1]
    cols = [rows[:, j].tolist() for j in range(k)]
    return [sum(c[i] << (64 * j) for j, c in enumerate(cols)) for i in range(len(rows))]


def _count_paths(f: BddHandle, halve: bool) -> int:
    """Sum over paths to true of (1, or 2**(L - path length) when ``halve``)."""
    nf = f.file
    L = nf.meta.varcount
    k = L // 64 + 1
    ctx = current()
    levels = [l for l, _ in nf.meta.levels]
    pq = LevelizedPQ(ctx.store, levels, width=1 + k, nkeys=1, memory_bytes=ctx.pq_bytes, k=ctx.k)
    cur = LevelCursor(nf, f.negated)
    total = 0
    root = nf.root()
    pq.push(np.concatenate([np.asarray([[root]], dtype=_DT), _limbs([1 << L if halve else 1], k)],
                           axis=1), [core.label_of(root)])
    try:
        while True:
            label = pq.setup_next_level()
            if label is None:
                break
            rows = pq.pop_level()
            uids, lo, hi = cur.level(label)
            targets = rows[:, 0]
            vals = _unlimb(rows[:, 1:])
            brk = np.flatnonzero(targets[1:] != targets[:-1]) + 1
            starts = [0] + brk.tolist()
            ends = brk.tolist() + [len(rows)]
            ut = targets[starts]
            idx = np.searchsorted(uids, ut)
            sums = [sum(vals[a:b]) for a, b in zip(starts, ends)]
            out_t: list[int] = []
            out_v: list[int] = []
            for s, i in zip(sums, idx.tolist()):
                v = s >> 1 if halve else s
                for child in (int(lo[i]), int(hi[i])):
                    if core.is_leaf(child):
                        if core.value_of(child):
                            total += v
                    else:
                        out_t.append(child)
                        out_v.append(v)
            if out_t:
                t = np.asarray(out_t, dtype=_DT).reshape(-1, 1)
                pq.push(np.concatenate([t, _limbs(out_v, k)], axis=1),
                        core.labels(t[:, 0]).astype(np.int64))
    finally:
        cur.close()
        pq.close()
    return total


def bdd_pathcount(f: Handle) -> int:
    """Number of root-to-true paths."""
    f = reduced(f)
    if f.is_leaf:
        return int(f.leaf_value)
    return _count_paths(f, halve=False)


def bdd_satcount(f: Handle, varcount: Optional[int] = None) -> int:
    """Satisfying assignments over a domain of ``varcount`` variables.

    The domain defaults to the variables ``f`` depends on.
    """
    f = reduced(f)
    L = f.file.meta.varcount
    n = L if varcount is None else int(varcount)
    if n < L:
        raise PreconditionError(f"domain of {n} variables is smaller than the {L} levels of f")
    if f.is_leaf:
        return (1 << n) if f.leaf_value else 0
    return _count_paths(f, halve=True) << (n - L)


def bdd_nodecount(f: Handle) -> int:
    return reduced(f).file.meta.count


def bdd_varcount(f: Handle) -> int:
    return reduced(f).file.meta.varcount


def bdd_meta(f: Handle):
    """(node count, variable count, per-level (label, count), canonical)."""
    f = reduced(f)
    m = f.file.meta
    return m.count, m.varcount, list(m.levels), m.canonical


# -- evaluation and witnesses --------------------------------------------------------


def _walk(f: BddHandle, choose) -> Optional[list[tuple[int, bool]]]:
    """Follow one path top-down; ``choose(label, low, high)`` picks a branch."""
    if f.is_leaf:
        return [] if f.leaf_value else None
    cur = LevelCursor(f.file, f.negated)
    t = f.file.root()
    path = []
    try:
        for label, _ in f.file.meta.levels:
            if core.is_leaf(t):
                break
            if core.label_of(t) != label:
                continue
            uids, lo, hi = cur.level(label)
            i = int(np.searchsorted(uids, t))
            b = choose(label, int(lo[i]), int(hi[i]))
            path.append((label, b))
            t = int(hi[i]) if b else int(lo[i])
    finally:
        cur.close()
    return path if core.value_of(t) else None


def bdd_eval(f: Handle, a) -> bool:
    """Value of ``f`` under an assignment covering all its variables.

    ``a`` may be a mapping, a list of (variable, value) pairs, or a sequence
    of booleans indexed by variable.
    """
    f = reduced(f)
    if isinstance(a, Mapping):
        asg = {int(k): bool(v) for k, v in a.items()}
    else:
        seq = list(a)
        if seq and isinstance(seq[0], (tuple, list)):
            asg = _assignment(seq)
        else:
            asg = {i: bool(v) for i, v in enumerate(seq)}
    missing = [l for l, _ in f.file.meta.levels if l not in asg]
    if missing:
        raise PreconditionError(f"assignment does not cover variables {missing[:5]}")
    if f.is_leaf:
        return f.leaf_value
    path = _walk(f, lambda label, lo, hi: asg[label])
    return path is not None


def bdd_satmin(f: Handle) -> Optional[list[tuple[int, bool]]]:
    """Lexicographically smallest satisfying path as (variable, value) pairs.

    Only the variables on the path are listed; None for the false function.
    """
    return _walk(reduced(f), lambda label, lo, hi: lo == FALSE)


def bdd_satmax(f: Handle) -> Optional[list[tuple[int, bool]]]:
    """Lexicographically largest satisfying path; see :func:`bdd_satmin`."""
    return _walk(reduced(f), lambda label, lo, hi: hi != FALSE)


# -- equality ------------------------------------------------------------------------

#: Which algorithm decided the most recent :func:`bdd_equal` call.
last_equal_path: Optional[str] = None


def _trivially_different(f: BddHandle, g: BddHandle) -> bool:
    mf, mg = f.file.meta, g.file.meta
    return mf.count != mg.count or mf.levels != mg.levels


def equal_scan(f: BddHandle, g: BddHandle) -> bool:
    """Lock-step comparison of two canonical files under the same flag."""
    if not (f.canonical and g.canonical) or f.negated != g.negated:
        raise PreconditionError("the scan needs two canonical files under equal negation flags")
    if _trivially_different(f, g):
        return False
    rf = f.file.reader(reverse=False)
    rg = g.file.reader(reverse=False)
    try:
        while rf.has_next():
            n = min(rf.remaining(), rf._block)
            if not np.array_equal(rf.take(n), rg.take(n)):
                return False
        return not rg.has_next()
    finally:
        rf.close()
        rg.close()


def equal_sweep(f: BddHandle, g: BddHandle) -> bool:
    """Isomorphism check by a top-down sweep over pairs of nodes.

    On each level the number of distinct pairs must equal the number of nodes
    of ``f`` there; any surplus, or mismatching children, means the two
    reduced diagrams differ.
    """
    nf, ng = f.file, g.file
    ctx = current()
    counts = dict(nf.meta.levels)
    pq = LevelizedPQ(ctx.store, list(counts), width=2, nkeys=2,
                     memory_bytes=ctx.pq_bytes, k=ctx.k)
    cf = LevelCursor(nf, f.negated)
    cg = LevelCursor(ng, g.negated)
    rf, rg = nf.root(), ng.root()
    if core.label_of(rf) != core.label_of(rg):
        return False
    pq.push(np.asarray([[rf, rg]], dtype=_DT), [core.label_of(rf)])
    try:
        while True:
            label = pq.setup_next_level()
            if label is None:
                return True
            rows = pq.pop_level()
            keep = np.ones(len(rows), dtype=bool)
            keep[1:] = (rows[1:] != rows[:-1]).any(axis=1)
            pairs = rows[keep]
            if len(pairs) > counts.get(label, 0):
                return False
            fu, flo, fhi = cf.level(label)
            gu, glo, ghi = cg.level(label)
            i = np.searchsorted(fu, pairs[:, 0])
            j = np.searchsorted(gu, pairs[:, 1])
            if (i >= len(fu)).any() or (j >= len(gu)).any() or \
                    (fu[i] != pairs[:, 0]).any() or (gu[j] != pairs[:, 1]).any():
                return False
            nxt = []
            for a, b in ((flo[i], glo[j]), (fhi[i], ghi[j])):
                la, lb = core.leaf_mask(a), core.leaf_mask(b)
                if (la != lb).any():
                    return False
                if (a[la] != b[lb]).any():
                    return False
                ia, ib = a[~la], b[~lb]
                if (core.labels(ia) != core.labels(ib)).any():
                    return False
                nxt.append(np.stack([ia, ib], axis=1))
            nxt = np.concatenate(nxt)
            if len(nxt):
                pq.push(nxt, core.labels(nxt[:, 0]).astype(np.int64))
    finally:
        cf.close()
        cg.close()
        pq.close()


def bdd_equal(f: Handle, g: Handle) -> bool:
    """Whether ``f`` and ``g`` denote the same function."""
    global last_equal_path
    f, g = reduced(f), reduced(g)
    if f.file is g.file and f.negated == g.negated:
        last_equal_path = "same"
        return True
    if f.is_leaf or g.is_leaf:
        last_equal_path = "trivial"
        return f.is_leaf and g.is_leaf and f.leaf_value == g.leaf_value
    if not f.file.meta.reduced:
        f = _normalise(_copy(f))
    if not g.file.meta.reduced:
        g = _normalise(_copy(g))
    if _trivially_different(f, g):
        last_equal_path = "trivial"
        return False
    if f.canonical and g.canonical and f.negated == g.negated:
        last_equal_path = "scan"
        return equal_scan(f, g)
    last_equal_path = "sweep"
    return equal_sweep(f, g)


def bdd_unequal(f: Handle, g: Handle) -> bool:
    return not bdd_equal(f, g)
