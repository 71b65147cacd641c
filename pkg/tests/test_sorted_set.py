from __future__ import annotations

import random

import pytest

from batchtree.ptree import INSERT, Op
from batchtree.ptree.nodes import iter_nodes
from batchtree.ptree.tree import apply_ops
from batchtree.runtime import run_recorded
from batchtree.sorted_set import SetHandle, difference, intersection, spine_snapshot, union


def _run(task, seed=0):
    return run_recorded(task, seed=seed)[0]


def test_examples():
    a, b = SetHandle.of([1, 2, 3]), SetHandle.of([2, 3, 4])
    assert _run(intersection(a, b)).items() == [2, 3]
    x = SetHandle.of(range(0, 50, 3))
    assert _run(union(x, SetHandle.empty())).items() == x.items()
    assert _run(difference(x, x)).items() == []


def test_empty_operands():
    e = SetHandle.empty()
    x = SetHandle.of([5, 9])
    assert _run(intersection(e, x)).items() == []
    assert _run(union(e, e)).items() == []
    assert _run(difference(e, x)).items() == []
    assert _run(difference(x, e)).items() == [5, 9]


def test_snapshot_isolates_original():
    t = SetHandle.of(range(0, 100, 2)).tree
    before = t.to_csv()
    snap = spine_snapshot(t)
    run_recorded(apply_ops(snap, [Op(INSERT, k) for k in range(1, 100, 10)]))
    assert t.to_csv() == before and t.validate() == []
    assert len(snap) == 60 and snap.validate() == []


def test_snapshot_of_single_leaf_is_fresh():
    t = SetHandle.of([7]).tree
    snap = spine_snapshot(t)
    assert snap.root is not t.root and snap.items() == [7]


def test_snapshot_shares_interior():
    t = SetHandle.of(range(4096)).tree
    snap = spine_snapshot(t)
    old = {id(v) for v in iter_nodes(t.root)}
    new = list(iter_nodes(snap.root))
    fresh = sum(id(v) not in old for v in new)
    assert len(new) == len(old)
    # root, both spines and the two end leaves
    assert fresh <= 2 * (t.height + 1)


@pytest.mark.parametrize("seed", range(5))
def test_matches_set_oracle_and_inputs_persist(seed):
    rng = random.Random(seed)
    for _ in range(20):
        sa = set(rng.sample(range(3000), rng.randrange(0, 400)))
        sb = set(rng.sample(range(3000), rng.randrange(0, 400)))
        a, b = SetHandle.of(sa), SetHandle.of(sb)
        csv_a, csv_b = a.to_csv(), b.to_csv()
        cases = ((intersection, a, b, sa & sb), (union, a, b, sa | sb),
                 (difference, a, b, sa - sb), (difference, b, a, sb - sa))
        for op, x, y, want in cases:
            got = _run(op(x, y), seed)
            assert got.items() == sorted(want)
            assert got.tree.validate() == []
        assert a.to_csv() == csv_a and b.to_csv() == csv_b
        assert a.tree.validate() == [] and b.tree.validate() == []


def test_algebraic_laws():
    rng = random.Random(99)
    for _ in range(30):
        a = SetHandle.of(rng.sample(range(5000), rng.randrange(0, 600)))
        b = SetHandle.of(rng.sample(range(5000), rng.randrange(0, 600)))
        ab, ba = _run(intersection(a, b)), _run(intersection(b, a))
        assert ab.items() == ba.items()
        u = _run(union(a, b))
        assert set(_run(difference(u, b)).items()) <= set(a.items())
        assert len(u) == len(a) + len(b) - len(ab)


def test_payloads():
    a = SetHandle(SetHandle.of([1, 2]).tree)
    for leaf_key, pay in ((1, "a1"), (2, "a2")):
        a.tree.handle(leaf_key).payload = pay
    b = SetHandle.of([2, 3, 4])
    for k in (2, 3, 4):
        b.tree.handle(k).payload = f"b{k}"
    # intersection keeps the first operand's payload
    assert _run(intersection(a, b)).tree.pairs() == [(2, "a2")]
    assert _run(intersection(b, a)).tree.pairs() == [(2, "b2")]
