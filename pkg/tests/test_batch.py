from __future__ import annotations

import random

import pytest
from hypothesis import given, settings, strategies as st

from batchtree.batch import (
    Batch, BatchNode, DedicatedQueue, Slice, batch_from_sorted, batch_of, batch_violations,
    bbt_join, check_log_splitting, is_complete, queue_pop, queue_push, slice_join, slice_of,
)
from batchtree.runtime import TICK, par2, run_recorded


def test_from_sorted_examples():
    assert batch_from_sorted([]).root is None
    b = batch_from_sorted(range(1, 8))
    assert b.root.height == 3 and b.size == 7
    assert (b.root.first, b.root.last) == (1, 7)
    one = batch_from_sorted([5])
    assert one.root.height == 0 and one.items() == [5]


def test_from_sorted_rejects_unsorted():
    with pytest.raises(ValueError):
        batch_from_sorted([1, 3, 2])
    with pytest.raises(ValueError):
        batch_from_sorted([1, 1])


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 13, 100, 257])
def test_complete_trees_are_valid(n):
    b = batch_from_sorted(range(n))
    assert batch_violations(b.root, sorted_items=True) == []
    assert is_complete(b.root)
    assert b.items() == list(range(n))


def test_validator_names_problems():
    b = batch_from_sorted(range(8))
    b.root.left.size = 99
    msgs = batch_violations(b.root)
    assert any("size" in m for m in msgs)
    lopsided = BatchNode(BatchNode(BatchNode(BatchNode.leaf(1), BatchNode.leaf(2)),
                                   BatchNode.leaf(3)), BatchNode.leaf(4))
    lopsided = BatchNode(lopsided, BatchNode.leaf(5))
    assert any("unbalanced" in m for m in batch_violations(lopsided))


def test_slice_examples():
    b = batch_from_sorted(range(8))
    assert slice_of(b, 0, 7).subtrees == [b.root]
    s = slice_of(b, 1, 6)
    assert len(s) == 4 and s.leaf_count() == 6
    assert slice_join(s).items() == list(range(1, 7))
    assert len(slice_of(b, 3, 3)) == 1
    single = slice_of(b, 4, 4)
    assert slice_join(single).items() == [4]
    pair = Slice([b.root.left, b.root.right])
    joined = slice_join(pair)
    assert joined.root.height == b.root.left.height + 1
    with pytest.raises(IndexError):
        slice_of(b, 3, 8)


def test_slice_roundtrip_exhaustive():
    for n in (1, 2, 7, 33, 256):
        b = batch_from_sorted(range(n))
        for lo in range(n):
            for hi in range(lo, n, max(1, n // 40)):
                got = slice_join(slice_of(b, lo, hi))
                assert got.items() == list(range(lo, hi + 1))
                assert batch_violations(got.root) == []


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 200), st.integers(0, 200))
def test_bbt_join(nl, nr):
    left = batch_from_sorted(range(nl)).root
    right = batch_from_sorted(range(nl, nl + nr)).root
    j = bbt_join(left, right)
    assert Batch(j).items() == list(range(nl + nr))
    assert batch_violations(j, sorted_items=True) == []


def test_log_splitting():
    assert check_log_splitting(batch_from_sorted(range(1024)), trials=3000)
    assert check_log_splitting(batch_from_sorted(range(64)))
    assert check_log_splitting(batch_from_sorted([1]))
    cat = BatchNode.leaf(0)
    for i in range(1, 64):
        cat = BatchNode(BatchNode.leaf(i), cat)
    assert not check_log_splitting(cat)


def test_queue_fifo_and_empty():
    q = DedicatedQueue()

    def prog():
        none = yield from queue_pop(q)
        yield from queue_push(q, "a")
        yield from queue_push(q, "b")
        x = yield from queue_pop(q)
        y = yield from queue_pop(q)
        return none, x, y

    assert run_recorded(prog())[0] == (None, "a", "b")
    assert q.empty()


@pytest.mark.parametrize("seed", range(20))
def test_queue_spsc_matches_fifo(seed):
    q = DedicatedQueue()
    rng = random.Random(seed)
    pushed = list(range(2000 if seed else 10_000))
    popped: list = []

    def producer():
        for x in pushed:
            if rng.random() < 0.3:
                yield TICK
            yield from queue_push(q, x)

    def consumer():
        while len(popped) < len(pushed):
            x = yield from queue_pop(q)
            if x is None:
                yield TICK
            else:
                popped.append(x)

    _, rec = run_recorded(par2(producer(), consumer()), seed=seed)
    assert popped == pushed
    assert rec.contention["queue"] <= 2


def test_batch_of_keeps_order():
    items = [5, 1, 4]
    assert batch_of(items).items() == items
    assert len(batch_of(items)) == 3
