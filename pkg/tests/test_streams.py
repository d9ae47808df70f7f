import os

import numpy as np
import pytest
from hypothesis import given, strategies as st

from extbdd import core
from extbdd.core import FALSE, MAX_ID, TRUE, LevelInfo, NodeRecord
from extbdd.errors import EndOfStream, IntegrityError, PreconditionError
from extbdd.streams import (HEADER_SIZE, KIND_NODES, ArcWriter, NodeWriter, RecordReader,
                            RecordWriter, load_node_file, meta_of, read_header, write_leaf)

x = core.encode_node


def xor_file(store):
    """x0 xor x1 written bottom-up."""
    w = NodeWriter(store)
    w.push((x(1, MAX_ID), TRUE, FALSE))
    w.push((x(1, MAX_ID - 1), FALSE, TRUE))
    w.push((x(0, MAX_ID), x(1, MAX_ID - 1), x(1, MAX_ID)))
    return w.close()


def test_and_file_meta(store):
    w = NodeWriter(store)
    w.push((x(1, MAX_ID), FALSE, TRUE))
    w.push((x(0, MAX_ID), FALSE, x(1, MAX_ID)))
    nf = w.close()
    assert meta_of(nf) == (2, 2, [LevelInfo(0, 1), LevelInfo(1, 1)], True)


def test_xor_file_meta(store):
    nf = xor_file(store)
    n, l, levels, canonical = meta_of(nf)
    assert (n, l, levels) == (3, 2, [LevelInfo(0, 1), LevelInfo(1, 2)])
    assert canonical


def test_leaf_only_meta(store):
    nf = write_leaf(store, True)
    assert meta_of(nf)[:3] == (0, 0, [])
    assert nf.is_leaf and nf.root() == TRUE


def test_descending_pushes_accepted(store):
    w = NodeWriter(store)
    w.push((x(2, 0), FALSE, TRUE))
    w.push((x(0, 0), FALSE, x(2, 0)))
    nf = w.close()
    assert nf.meta.count == 2
    assert not nf.meta.canonical     # identifiers not packed from MAX_ID


def test_ascending_push_rejected(store):
    w = NodeWriter(store)
    w.push((x(0, 0), FALSE, TRUE))
    with pytest.raises(PreconditionError, match="descending"):
        w.push((x(2, 0), FALSE, TRUE))
    w.abort()


def test_dangling_child_rejected(store):
    w = NodeWriter(store)
    with pytest.raises(IntegrityError):
        w.push((x(0, 0), FALSE, x(3, 0)))
    w.abort()


def test_child_on_same_level_rejected(store):
    w = NodeWriter(store)
    w.push((x(1, 5), FALSE, TRUE))
    with pytest.raises(IntegrityError):
        w.push((x(1, 4), FALSE, x(1, 5)))
    w.abort()


def test_canonical_detection(store):
    # duplicate children on one level -> not canonical, not reduced
    w = NodeWriter(store)
    w.push((x(1, MAX_ID), FALSE, TRUE))
    w.push((x(1, MAX_ID - 1), FALSE, TRUE))
    w.push((x(0, MAX_ID), x(1, MAX_ID - 1), x(1, MAX_ID)))
    nf = w.close()
    assert not nf.meta.canonical and not nf.meta.reduced
    # unreachable node -> not canonical
    w = NodeWriter(store)
    w.push((x(2, MAX_ID), FALSE, TRUE))
    w.push((x(1, MAX_ID), FALSE, TRUE))
    nf = w.close()
    assert not nf.meta.canonical


def test_reverse_reader_ascending(store):
    nf = xor_file(store)
    fwd = [r.uid for r in iter_records(nf.reader(reverse=False))]
    rev = [r.uid for r in iter_records(nf.reader(reverse=True))]
    assert fwd == sorted(fwd, reverse=True)
    assert rev == fwd[::-1]


def iter_records(r):
    out = []
    while r.has_next():
        out.append(r.next())
    r.close()
    return out


def test_peek_then_next(store):
    nf = xor_file(store)
    r = nf.reader()
    p = r.peek()
    assert isinstance(p, NodeRecord)
    assert r.next() == p
    r.next(); r.next()
    with pytest.raises(EndOfStream):
        r.next()
    with pytest.raises(EndOfStream):
        r.peek()
    r.close()


def test_refcount_deletes_file(store):
    nf = xor_file(store)
    nf.acquire().acquire()
    assert os.path.exists(nf.path)
    nf.release()
    assert os.path.exists(nf.path)
    nf.release()
    assert not os.path.exists(nf.path)
    with pytest.raises(IntegrityError):
        nf.release()


def test_header_layout(store):
    nf = xor_file(store)
    with open(nf.path, "rb") as f:
        raw = f.read()
    assert raw[:4] == b"XBDD"
    hdr, levels = read_header(nf.path)
    assert hdr.kind == KIND_NODES and hdr.count == 3
    assert levels == [LevelInfo(0, 1), LevelInfo(1, 2)]
    payload = np.frombuffer(raw[HEADER_SIZE:HEADER_SIZE + 3 * 24], dtype="<u8").reshape(3, 3)
    assert payload[0, 0] == x(1, MAX_ID)
    again = load_node_file(store, nf.path)
    assert again.meta.levels == nf.meta.levels and again.meta.canonical


def test_arc_writer_counts(store):
    w = ArcWriter(store)
    w.push_nodes(0, 1)
    w.push_nodes(1, 1)
    s0, s1 = x(0, 0), x(1, 0)
    w.push_internal(np.array([s0], dtype=np.uint64), np.array([s1], dtype=np.uint64), 1)
    w.push_leaf(np.array([s0 | 1, s1, s1 | 1], dtype=np.uint64),
                np.array([TRUE, FALSE, TRUE], dtype=np.uint64))
    arcs = w.close()
    assert arcs.node_count == 2 and arcs.internal_count == 1 and arcs.leaf_count == 3
    assert arcs.leaf_path.endswith(".leaf.arcs") and arcs.internal_path.endswith(".arcs")
    arcs.acquire().release()
    assert not os.path.exists(arcs.internal_path) and not os.path.exists(arcs.leaf_path)


def test_arc_writer_rejects_wrong_arc_count(store):
    w = ArcWriter(store)
    w.push_nodes(0, 1)
    w.push_leaf(np.array([x(0, 0)], dtype=np.uint64), np.array([TRUE], dtype=np.uint64))
    with pytest.raises(IntegrityError):
        w.close()
    w.abort()


@given(st.lists(st.tuples(st.integers(0, 2**64 - 1), st.integers(0, 2**64 - 1)), max_size=300),
       st.sampled_from([4096, 8192]))
def test_writer_reader_consistency(mgr, rows, block):
    store = mgr.store
    old = store.block_bytes
    store.block_bytes = block
    try:
        w = RecordWriter(store, store.new_path("t"), 4, 2)
        for i in range(0, len(rows), 7):
            w.append(np.asarray(rows[i:i + 7], dtype=np.uint64).reshape(-1, 2))
        w.close()
        r = RecordReader(store, w.path)
        got = r.read_all()
        r.close()
        assert got.tolist() == [list(t) for t in rows]
        r = RecordReader(store, w.path, reverse=True)
        got = [tuple(int(v) for v in r.next()) for _ in range(len(rows))]
        r.close()
        assert got == rows[::-1]
        os.remove(w.path)
    finally:
        store.block_bytes = old


@given(st.lists(st.integers(0, 6), min_size=1, max_size=7, unique=True))
def test_meta_matches_payload(mgr, labs):
    from extbdd import ops
    h = ops.bdd_and_vars(sorted(labs))
    rows = h.file.reader().read_all()
    counts = {}
    for u in rows[:, 0]:
        counts[core.label_of(int(u))] = counts.get(core.label_of(int(u)), 0) + 1
    assert [tuple(l) for l in h.file.meta.levels] == sorted(counts.items())
    h.release()
