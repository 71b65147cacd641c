from __future__ import annotations

import random

import pytest

from batchtree.batch import batch_of
from batchtree.ptree import (
    DELETE, INSERT, SEARCH, UPDATE, Op, PTree, apply_ops, batch_join_instances, coalesce,
    join_spines, lspine, reverse_index, rspine, usearch,
)
from batchtree.ptree.joining import init_spines, join23, refresh
from batchtree.ptree.nodes import (
    TreeNode, copy_spines, join, slice_join_23, slice_of_23, split,
)
from batchtree.ptree.tree import execute
from batchtree.harness.oracle import oracle_set
from batchtree.runtime import Barrier, barrier_wait, run_recorded


def random_shape(rng: random.Random, height: int, p3: float, items=None) -> TreeNode:
    """Random 2-3 tree of exactly ``height``; leaves numbered left to right."""
    items = items if items is not None else iter(range(10**9))
    if height == 0:
        return TreeNode.leaf(next(items))
    k = 3 if rng.random() < p3 else 2
    kids = [random_shape(rng, height - 1, p3, items) for _ in range(k)]
    return TreeNode(kids[0], kids[1] if k == 3 else None, kids[-1])


def shape(v: TreeNode | None):
    if v is None:
        return None
    if v.height == 0:
        return v.item
    return tuple(shape(c) for c in v.children())


def _tree_with_right_counts(counts: list[int]) -> TreeNode:
    """Height-len(counts) tree whose right-spine node at height k has counts[k-1] children."""
    v = TreeNode.leaf(0)
    for c in counts:
        sib = [_full(v.height) for _ in range(c - 1)]
        kids = sib + [v]
        v = TreeNode(kids[0], kids[1] if c == 3 else None, kids[-1])
    return v


def _full(h: int) -> TreeNode:
    if h == 0:
        return TreeNode.leaf(0)
    return TreeNode(_full(h - 1), None, _full(h - 1))


# -- spine structures ------------------------------------------------------------


def test_spine_examples():
    leaf = TreeNode.leaf(1)
    assert lspine(leaf) == rspine(leaf) == 0
    two = TreeNode(TreeNode.leaf(1), None, TreeNode.leaf(2))
    three = TreeNode(TreeNode.leaf(1), TreeNode.leaf(2), TreeNode.leaf(3))
    assert rspine(two) == 0 and rspine(three) == 1 and lspine(three) == 1
    x = _tree_with_right_counts([3, 2, 3, 3, 2, 3])
    assert x.height == 6 and rspine(x) == 0b101101


def test_join_spines_worked_example():
    overflow, _lj, rj = join_spines(0b1000000, 0, 0b101101, 0b100, 0, 0b10)
    assert not overflow and rj == 0b110010


def test_join_spines_equal_weights_overflow():
    assert join_spines(8, 5, 3, 8, 1, 6) == (True, 5, 6)


def test_join_spines_matches_brute_force():
    rng = random.Random(7)
    for _ in range(3000):
        x = random_shape(rng, rng.randrange(7), rng.random())
        y = random_shape(rng, rng.randrange(7), rng.random())
        j = join(x, y)
        want = (j.height > max(x.height, y.height), lspine(j), rspine(j))
        assert join_spines(x.weight, lspine(x), rspine(x), y.weight, lspine(y), rspine(y)) == want


# -- sequential helpers ---------------------------------------------------------------


def test_split_and_join_roundtrip():
    t = PTree.from_sorted(range(0, 40, 2))
    lt, eq, gt = split(t.root, 10)
    assert eq.item == 10
    assert PTree(lt, 5, False).items() == [0, 2, 4, 6, 8]
    assert PTree(gt, 14, False).items() == list(range(12, 40, 2))
    assert split(t.root, 11)[1] is None


def test_slice_join_23_examples():
    t = PTree.from_sorted(range(16))
    assert slice_join_23([t.root]) is t.root
    pieces = slice_of_23(t.root, 2, 13)
    assert PTree(slice_join_23(pieces), 12, False).items() == list(range(2, 14))
    rng = random.Random(3)
    heights = [4, 3, 1, 0, 2]
    counter = iter(range(1000))
    trees = [random_shape(rng, h, 0.5, counter) for h in heights]
    joined = slice_join_23(trees)
    flat = [x for tr in trees for x in PTree(tr, 0, False).items()]
    assert PTree(joined, 0, False).items() == flat


# -- pipelined join ---------------------------------------------------------------------


def _join23_run(l: TreeNode | None, r: TreeNode | None, seed: int) -> TreeNode | None:
    def prog():
        x, y = copy_spines(l), copy_spines(r)
        init_spines(x)
        init_spines(y)
        done = Barrier()
        j = yield from join23(x, y, done)
        yield from barrier_wait(done)
        if j is not None and j.touched:
            yield from refresh(j, False)
        return j

    return run_recorded(prog(), seed=seed)[0]


def test_join23_empty_and_equal():
    t = PTree.from_sorted(range(4), parents=False)
    assert shape(_join23_run(None, t.root, 0)) == shape(t.root)
    a = PTree.from_sorted(range(4), parents=False)
    b = PTree.from_sorted(range(4, 8), parents=False)
    j = _join23_run(a.root, b.root, 0)
    assert j.height == a.root.height + 1 and j.mid is None


def test_join23_matches_sequential_join_in_any_order():
    rng = random.Random(11)
    for trial in range(150):
        counter = iter(range(10**6))
        l = random_shape(rng, rng.randrange(0, 8), rng.random(), counter)
        r = random_shape(rng, rng.randrange(0, 8), rng.random(), counter)
        before = (shape(l), shape(r))
        want = shape(join(l, r))
        for seed in (0, trial + 1):
            j = _join23_run(l, r, seed)
            assert shape(j) == want
            out = PTree(j, 0, False)
            out.size = len(out.items())
            assert out.validate() == []
        assert (shape(l), shape(r)) == before


# -- coalescing ------------------------------------------------------------------------


def test_coalesce_examples():
    t = PTree.from_sorted([1, 2, 3], parents=False)
    ins, dele = Op(INSERT, 5, "x"), Op(DELETE, 5)
    acc = coalesce([ins, dele])
    assert len(acc) == 1 and acc.items()[0].kind == DELETE
    run_recorded(execute(t, acc))
    assert t.items() == [1, 2, 3]
    assert ins.result() == (False, None) and dele.result() == (True, "x")

    one = Op(INSERT, 5)
    acc = coalesce([one])
    assert acc.items()[0].kind == INSERT and acc.items()[0].ops == [one]

    s, i = Op(SEARCH, 3), Op(INSERT, 3, 9)
    t = PTree.from_sorted([1, 2], parents=False)
    acc = coalesce([s, i])
    assert acc.items()[0].kind == INSERT
    run_recorded(execute(t, acc))
    assert s.result() == (False, None) and t.items() == [1, 2, 3]


def test_coalesce_rejects_unsorted():
    with pytest.raises(ValueError):
        coalesce([Op(SEARCH, 2), Op(SEARCH, 1)])


# -- execute ------------------------------------------------------------------------------


def _apply(t: PTree, ops: list[Op], seed: int = 0) -> list[Op]:
    return run_recorded(apply_ops(t, ops), seed=seed)[0]


def test_execute_examples():
    t = PTree.from_sorted([1, 3, 5])
    _apply(t, [Op(INSERT, k) for k in (2, 4, 6)])
    assert t.items() == [1, 2, 3, 4, 5, 6] and t.validate() == []

    t = PTree.from_sorted([1, 3, 5])
    _apply(t, [])
    assert t.items() == [1, 3, 5] and t.validate() == []

    t = PTree.from_sorted(range(1, 9))
    ops = _apply(t, [Op(DELETE, k) for k in range(1, 9)])
    assert t.root is None and len(t) == 0 and all(op.found for op in ops)


def test_delete_absent_and_update():
    t = PTree.from_sorted([1, 2, 3], ["a", "b", "c"])
    d, u, s = Op(DELETE, 9), Op(UPDATE, 2, "B"), Op(SEARCH, 2)
    _apply(t, [d, u, s])
    assert d.result() == (False, None)
    assert u.result() == (True, "b") and s.result() == (True, "B")
    assert t.pairs() == [(1, "a"), (2, "B"), (3, "c")]


def test_untouched_leaves_keep_identity():
    t = PTree.from_sorted(range(0, 200, 2))
    before = {k: t.handle(k).node for k in range(0, 200, 2)}
    ops = [Op(INSERT, k) for k in range(1, 200, 14)] + [Op(DELETE, k) for k in range(0, 200, 18)]
    _apply(t, ops)
    deleted = set(range(0, 200, 18))
    for k, leaf in before.items():
        if k not in deleted:
            assert t.handle(k).node is leaf


@pytest.mark.parametrize("seed", range(6))
def test_execute_matches_oracle(seed):
    rng = random.Random(seed)
    for _ in range(40):
        n = rng.randrange(0, 33)
        init = [(k, rng.randrange(100)) for k in sorted(rng.sample(range(80), n))]
        raw = [(rng.choice([SEARCH, UPDATE, INSERT, DELETE]), rng.randrange(80), rng.randrange(100))
               for _ in range(rng.randrange(0, n + 2))]
        t = PTree.from_sorted([k for k, _ in init], [p for _, p in init])
        ops = _apply(t, [Op(*r) for r in raw], seed)
        want = oracle_set(raw, init)
        assert t.items() == want.items and [p for _, p in t.pairs()] == want.payloads
        assert [op.result() for op in ops] == want.results
        assert t.validate() == []


def test_schedule_independence():
    rng = random.Random(5)
    init = sorted(rng.sample(range(2000), 400))
    raw = [(rng.choice([SEARCH, INSERT, DELETE]), rng.randrange(2000), 0) for _ in range(300)]
    seen = set()
    for seed in range(50):
        t = PTree.from_sorted(init)
        ops = _apply(t, [Op(*r) for r in raw], seed)
        seen.add((repr(shape(t.root)), tuple(op.result() for op in ops)))
    assert len(seen) == 1


# -- unsorted search -----------------------------------------------------------------------


def test_usearch_examples():
    t = PTree.from_sorted(range(1, 11))
    probes, _ = run_recorded(usearch(t, batch_of([7, 11, 7])))
    a, b, c = probes.items()
    assert a.found and c.found and not b.found
    assert a.handle == c.handle and a.handle.item == 7
    empty, _ = run_recorded(usearch(t, batch_of([])))
    assert len(empty) == 0
    absent, _ = run_recorded(usearch(t, batch_of([0, 20, 30])))
    assert not any(p.found for p in absent.items())


def test_usearch_random():
    rng = random.Random(9)
    for seed in range(20):
        keys = sorted(rng.sample(range(500), rng.randrange(0, 100)))
        t = PTree.from_sorted(keys)
        probe = [rng.randrange(500) for _ in range(rng.randrange(0, 60))]
        got, _ = run_recorded(usearch(t, batch_of(probe)), seed=seed)
        assert [p.found for p in got.items()] == [k in set(keys) for k in probe]


# -- reverse indexing -------------------------------------------------------------------------


def _reverse(t: PTree, keys: list, seed: int = 0):
    handles = batch_of([t.handle(k) for k in keys])
    return run_recorded(reverse_index(t, handles), seed=seed)


def test_reverse_index_examples():
    t = PTree.from_sorted(range(1, 11))
    out, rec = _reverse(t, [9, 2, 5])
    assert out.items() == [2, 5, 9]
    assert rec.counters["probe_violations"] == 0
    empty, _ = _reverse(t, [])
    assert empty.root is None
    every, _ = _reverse(t, list(range(10, 0, -1)))
    assert every.items() == list(range(1, 11))
    assert t.validate() == []


def test_reverse_index_needs_parents():
    t = PTree.from_sorted(range(4), parents=False)
    with pytest.raises(ValueError):
        run_recorded(reverse_index(t, batch_of([t.handle(1)])))


def test_reverse_index_random():
    rng = random.Random(21)
    for seed in range(30):
        n = rng.randrange(1, 300)
        t = PTree.from_sorted(range(n))
        keys = rng.sample(range(n), rng.randrange(1, n + 1))
        out, rec = _reverse(t, keys, seed)
        assert out.items() == sorted(keys)
        assert rec.counters["probe_violations"] == 0
        assert t.validate() == []


# -- joining instances ----------------------------------------------------------------------------


def test_batch_join_instances_examples():
    parts = [PTree.from_sorted([1, 2], parents=False), PTree.from_sorted([9], parents=False),
             PTree.from_sorted([4], parents=False)]
    out, _ = run_recorded(batch_join_instances(batch_of(parts)))
    assert out.items() == [1, 2, 9, 4]
    assert [p.items() for p in parts] == [[1, 2], [9], [4]]

    one = PTree.from_sorted(range(5), parents=False)
    out, _ = run_recorded(batch_join_instances(batch_of([one])))
    assert out.items() == list(range(5))

    singles = [PTree.from_sorted([i], parents=False) for i in range(64)]
    out, _ = run_recorded(batch_join_instances(batch_of(singles)))
    assert out.items() == list(range(64)) and out.validate() == []


def test_batch_join_instances_random():
    rng = random.Random(4)
    for seed in range(30):
        parts, start = [], 0
        for _ in range(rng.randrange(1, 12)):
            k = rng.randrange(0, 40)
            parts.append(PTree.from_sorted(range(start, start + k), parents=False))
            start += k
        out, _ = run_recorded(batch_join_instances(batch_of(parts)), seed=seed)
        assert out.items() == list(range(start)) and out.validate() == []


# -- validator and output --------------------------------------------------------------------------


def test_validator_passes_fresh_and_flags_corruption():
    t = PTree.from_sorted(range(30))
    assert t.validate() == []
    t.root.right.spine ^= 1
    msgs = t.validate()
    assert msgs and msgs[0].startswith("^R")

    t = PTree.from_sorted(range(30))
    t.size = 7
    assert any("size" in m for m in t.validate())

    t = PTree.from_sorted(range(30))
    t.root.left.left.first = 99
    assert any("first/last" in m for m in t.validate())


def test_to_csv_and_dump():
    t = PTree.from_sorted([1, 2], ["a", None])
    assert t.to_csv() == "item,payload\n1,a\n2,\n"
    assert t.dump().splitlines() == ["[2] 1..2", "  1", "  2"]
    assert PTree().dump() == "" and 1 in t and 3 not in t


def test_from_sorted_rejects_bad_input():
    with pytest.raises(ValueError):
        PTree.from_sorted([2, 1])
    with pytest.raises(ValueError):
        PTree.from_sorted([1, 2], ["a"])
