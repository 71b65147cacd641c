"""Pipelined-splitting batch operations: filter, balance, partition, join, merge, sort.

Every operation here is a task (a generator for the runtime); run it with
``runtime.run(op(...))`` or compose it with ``yield from`` inside another
task.  Per-operation scratch state (queues, barriers, reactivation
wrappers) lives in mirror nodes built for the duration of one call, so
the input batches are never mutated.

Pass ``log=[]`` to record every feed as ``(node, queue_index, subtree)``.
"""

from __future__ import annotations

import functools
from typing import Any, Callable

from .batch import (
    Batch, BatchNode, DedicatedQueue, bbt_join, queue_pop, queue_push,
)
from .runtime import (
    TICK, Barrier, ReactivationWrapper, Task, barrier_notified, barrier_notify,
    barrier_wait, count, fork, par2, reactivate, tick,
)


@functools.total_ordering
class _Infinity:
    """Pivot sentinel that compares above every item."""

    __slots__ = ()

    def __eq__(self, other: object) -> bool:
        return other is self

    def __lt__(self, other: object) -> bool:
        return False

    def __gt__(self, other: object) -> bool:
        return other is not self

    def __ge__(self, other: object) -> bool:
        return True

    def __le__(self, other: object) -> bool:
        return other is self

    def __hash__(self) -> int:
        return hash("batchtree.INF")

    def __repr__(self) -> str:
        return "INF"


INF = _Infinity()


def _join_cost(left: Any, right: Any) -> int:
    if left is None or right is None:
        return 1
    return abs(left.height - right.height) + 1


# ---------------------------------------------------------------------------
# filter / balance
# ---------------------------------------------------------------------------


class _FNode:
    """Mirror of a node of the filtered tree."""

    __slots__ = ("left", "right", "item", "count", "rstart", "rend", "q", "wrapper")

    def __init__(self, left: "_FNode | None", right: "_FNode | None", item: Any, count: int) -> None:
        self.left = left
        self.right = right
        self.item = item
        self.count = count
        self.rstart = 0
        self.rend = 0
        self.q = (DedicatedQueue(), DedicatedQueue())
        self.wrapper: ReactivationWrapper | None = None


class _Slot:
    """Node of the blank output tree being pushed down."""

    __slots__ = ("left", "right", "rstart", "rend", "depth", "done", "item")

    def __init__(self, left: "_Slot | None", right: "_Slot | None", rstart: int, rend: int,
                 depth: int) -> None:
        self.left = left
        self.right = right
        self.rstart = rstart
        self.rend = rend
        self.depth = depth
        self.done = Barrier() if left is None else None
        self.item = None

    def __repr__(self) -> str:
        return f"_Slot([{self.rstart},{self.rend}), depth={self.depth})"


def _count_pass(v: BatchNode, pred: Callable[[Any], bool]) -> Task:
    yield TICK
    if v.left is None:
        return _FNode(None, None, v.item, 1 if pred(v.item) else 0)
    l, r = yield from par2(_count_pass(v.left, pred), _count_pass(v.right, pred))
    return _FNode(l, r, None, l.count + r.count)


def _range_pass(v: _FNode, rstart: int, log: list | None) -> Task:
    yield TICK
    v.rstart = rstart
    v.rend = rstart + v.count
    v.wrapper = ReactivationWrapper(functools.partial(_filter_pushdown, v, log), "reactivation")
    if v.left is not None:
        yield from par2(_range_pass(v.left, rstart, log),
                        _range_pass(v.right, rstart + v.left.count, log))


def _blank_tree(lo: int, hi: int, depth: int) -> Task:
    yield TICK
    if hi - lo == 1:
        return _Slot(None, None, lo, hi, depth)
    mid = lo + (hi - lo + 1) // 2
    l, r = yield from par2(_blank_tree(lo, mid, depth + 1), _blank_tree(mid, hi, depth + 1))
    return _Slot(l, r, lo, hi, depth)


def _feed(node: Any, i: int, sub: Any, log: list | None) -> Task:
    count("feeds")
    if log is not None:
        log.append((node, i, sub))
    yield from queue_push(node.q[i], sub)
    yield from reactivate(node.wrapper)


def _filter_pushdown(v: _FNode, log: list | None) -> Task:
    for i in (0, 1):
        b = yield from queue_pop(v.q[i])
        if b is None:
            continue
        yield from reactivate(v.wrapper)
        yield TICK
        if v.left is None:
            b.item = v.item
            yield from barrier_notify(b.done)
        elif b.rend <= v.left.rend:
            yield from _feed(v.left, i, b, log)
        elif b.rstart >= v.right.rstart:
            yield from _feed(v.right, i, b, log)
        else:
            count("splits")
            yield fork(_filter_split(v, b, log))


def _filter_split(v: _FNode, b: _Slot, log: list | None) -> Task:
    while True:
        yield TICK
        if b.rend <= v.left.rend:
            yield from _feed(v.left, 1, b, log)
            break
        if b.rstart >= v.right.rstart:
            yield from _feed(v.right, 0, b, log)
            break
        if b.left.rend <= v.left.rend:
            yield from _feed(v.left, 1, b.left, log)
            b = b.right
        else:
            yield from _feed(v.right, 0, b.right, log)
            b = b.left


def _collect(u: _Slot) -> Task:
    yield TICK
    if u.left is None:
        yield from barrier_wait(u.done)
        return BatchNode(item=u.item)
    l, r = yield from par2(_collect(u.left), _collect(u.right))
    return BatchNode(l, r)


def filter(t: Batch | BatchNode | None, pred: Callable[[Any], bool], *,
           log: list | None = None) -> Task:
    """Task: the items of ``t`` satisfying ``pred``, in order, as a complete batch.

    ``t`` may be any leaf-based binary tree of BatchNodes, balanced or not.
    """
    root = t.root if isinstance(t, Batch) else t
    if root is None:
        return Batch(None)
    mirror = yield from _count_pass(root, pred)
    if mirror.count == 0:
        return Batch(None)
    _, u = yield from par2(_range_pass(mirror, 0, log), _blank_tree(0, mirror.count, 0))
    yield from _feed(mirror, 0, u, log)
    out = yield from _collect(u)
    return Batch(out)


def balance(t: Batch | BatchNode | None, *, log: list | None = None) -> Task:
    """Task: the same item sequence reshaped into a complete batch."""
    return (yield from filter(t, _always, log=log))


def _always(_item: Any) -> bool:
    return True


# ---------------------------------------------------------------------------
# partition engine (shared with the 2-3 tree's splitting phase)
# ---------------------------------------------------------------------------


class PNode:
    """Mirror of a pivot-tree node during a partitioning push-down.

    ``pivot`` is the last key of the left subtree; ``key`` the last key of
    the whole subtree.  ``data`` carries the source leaf for the caller.
    """

    __slots__ = ("left", "right", "key", "pivot", "data", "q", "wrapper", "frozen",
                 "fed", "split", "aux")

    def __init__(self, left: "PNode | None", right: "PNode | None", key: Any, data: Any = None) -> None:
        self.left = left
        self.right = right
        self.key = key
        self.pivot = left.key if left is not None else None
        self.data = data
        self.q = (DedicatedQueue(), DedicatedQueue())
        self.wrapper: ReactivationWrapper | None = None
        self.frozen = False
        self.fed = Barrier()
        self.split: Barrier | None = None
        self.aux: Any = None

    def __repr__(self) -> str:
        if self.left is None:
            return f"PNode.leaf({self.key!r})"
        return f"PNode(pivot={self.pivot!r})"


def mirror_pivots(root: Any, key_of: Callable[[Any], Any], log: list | None = None) -> Task:
    """Task: PNode mirror of a BBT whose leaf keys come from ``key_of(leaf)``."""
    yield TICK
    if root.left is None:
        v = PNode(None, None, key_of(root), root)
    else:
        l, r = yield from par2(mirror_pivots(root.left, key_of, log),
                               mirror_pivots(root.right, key_of, log))
        v = PNode(l, r, r.key)
    v.wrapper = ReactivationWrapper(functools.partial(_partition_pushdown, v, log), "reactivation")
    return v


def _is_leaf(b: Any) -> bool:
    return b.children2() is None


def _partition_pushdown(v: PNode, log: list | None) -> Task:
    if v.left is None:
        return
    empty = True
    for i in (0, 1):
        b = yield from queue_pop(v.q[i])
        if b is None:
            continue
        yield from reactivate(v.wrapper)
        empty = False
        yield TICK
        if b.last <= v.pivot:
            yield from _feed(v.left, i, b, log)
        elif b.first > v.pivot:
            yield from _feed(v.right, i, b, log)
        else:
            count("splits")
            v.split = Barrier()
            yield fork(_partition_split(v, b, log))
    if empty and (yield from barrier_notified(v.fed)):
        # frozen is checked before waiting so the split barrier has one waiter
        if v.frozen:
            return
        if v.split is not None:
            yield from barrier_wait(v.split)
        v.frozen = True
        count("freezes")
        yield from barrier_notify(v.left.fed)
        yield from barrier_notify(v.right.fed)
        yield from reactivate(v.left.wrapper)
        yield from reactivate(v.right.wrapper)


def _partition_split(v: PNode, b: Any, log: list | None) -> Task:
    while True:
        yield TICK
        # a piece wholly on one side goes down whole; only straddlers descend
        if b.last <= v.pivot:
            yield from _feed(v.left, 1, b, log)
            break
        if b.first > v.pivot:
            yield from _feed(v.right, 0, b, log)
            break
        left, right = b.children2()
        if left.last <= v.pivot:
            yield from _feed(v.left, 1, left, log)
            b = right
        else:
            yield from _feed(v.right, 0, right, log)
            b = left
    yield from barrier_notify(v.split)


def start_partition(mirror: PNode, pushed: Any, log: list | None = None) -> Task:
    """Task: begin pushing the tree ``pushed`` (or nothing, if ``None``) down ``mirror``.

    Returns immediately; callers wait on each leaf's ``fed`` barrier and
    then call :func:`drain_pieces`.
    """
    yield from barrier_notify(mirror.fed)
    if pushed is not None:
        yield from _feed(mirror, 0, pushed, log)
    else:
        yield from reactivate(mirror.wrapper)


def drain_pieces(v: PNode) -> Task:
    """Task: after ``v.fed`` passes, the pieces that reached leaf ``v``.

    Returns ``(outer, inner)``: the reversed first queue and the second
    queue, each listed left to right.  Their concatenation is an ordered
    slice of the pushed tree.
    """
    yield from barrier_wait(v.fed)
    outer: list = []
    while True:
        b = yield from queue_pop(v.q[0])
        if b is None:
            break
        outer.append(b)
    inner: list = []
    while True:
        b = yield from queue_pop(v.q[1])
        if b is None:
            break
        inner.append(b)
    outer.reverse()
    return outer, inner


def _join_pieces(q1: list, q2: list) -> Task:
    """Join reversed queue contents shortest-first, as BBTs."""
    left = None
    for b in q1:
        yield tick(_join_cost(left, b))
        left = bbt_join(left, b)
    right = None
    for b in reversed(q2):
        yield tick(_join_cost(b, right))
        right = bbt_join(b, right)
    yield tick(_join_cost(left, right))
    return bbt_join(left, right)


class Part:
    """A partition leaf: a pivot (or ``INF``) and the batch of items sent to it."""

    __slots__ = ("pivot", "batch")

    def __init__(self, pivot: Any, batch: Batch) -> None:
        self.pivot = pivot
        self.batch = batch

    def __repr__(self) -> str:
        return f"Part({self.pivot!r}, {self.batch.items()!r})"


def _collate_parts(v: PNode) -> Task:
    yield TICK
    if v.left is None:
        q1, q2 = yield from drain_pieces(v)
        root = yield from _join_pieces(q1, q2)
        return BatchNode(item=Part(v.key, Batch(root)))
    l, r = yield from par2(_collate_parts(v.left), _collate_parts(v.right))
    return BatchNode(l, r)


def partition(t: Batch, p: Batch, *, log: list | None = None) -> Task:
    """Task: split sorted ``t`` around sorted pivots ``p``.

    Returns a batch of :class:`Part` records, one per pivot plus a final
    ``INF`` part.  Item ``x`` goes to the first part whose pivot is ``>= x``.
    """
    yield TICK
    sentinel = BatchNode(item=INF)
    yield tick(p.root.height + 1 if p.root is not None else 1)
    pivots = bbt_join(p.root, sentinel)
    mirror = yield from mirror_pivots(pivots, _item_key, log)
    yield from start_partition(mirror, t.root, log)
    out = yield from _collate_parts(mirror)
    return Batch(out)


def _item_key(leaf: BatchNode) -> Any:
    return leaf.item


# ---------------------------------------------------------------------------
# join / merge / sort
# ---------------------------------------------------------------------------


class _Dummy:
    __slots__ = ()

    def __repr__(self) -> str:
        return "<empty>"


_DUMMY = _Dummy()


def _not_dummy(item: Any) -> bool:
    return item is not _DUMMY


def _expand(v: BatchNode) -> Task:
    yield TICK
    if v.left is None:
        inner = v.item
        if inner.root is None:
            return BatchNode(item=_DUMMY)
        return inner.root
    l, r = yield from par2(_expand(v.left), _expand(v.right))
    return BatchNode(l, r)


def join_batches(t: Batch, *, log: list | None = None) -> Task:
    """Task: concatenate the batches at the leaves of ``t`` into one complete batch."""
    if t.root is None:
        return Batch(None)
    expanded = yield from _expand(t.root)
    return (yield from filter(expanded, _not_dummy, log=log))


def _left(a: Any, _b: Any) -> Any:
    return a


def _append_pivot(v: BatchNode, combine: Callable[[Any, Any], Any]) -> Task:
    yield TICK
    if v.left is None:
        part = v.item
        b = part.batch
        if part.pivot is INF:
            return BatchNode(item=b)
        root = b.root
        if root is not None and root.last == part.pivot:
            yield tick(root.height + 1)
            return BatchNode(item=Batch(_replace_last(root, combine(part.pivot, root.last))))
        yield tick(_join_cost(root, None) if root is None else root.height + 1)
        return BatchNode(item=Batch(bbt_join(root, BatchNode(item=part.pivot))))
    l, r = yield from par2(_append_pivot(v.left, combine), _append_pivot(v.right, combine))
    return BatchNode(l, r)


def _replace_last(v: BatchNode, item: Any) -> BatchNode:
    if v.left is None:
        return BatchNode(item=item)
    return BatchNode(v.left, _replace_last(v.right, item))


def merge(a: Batch, b: Batch, combine: Callable[[Any, Any], Any] = _left, *,
          log: list | None = None) -> Task:
    """Task: sorted union of sorted ``a`` and ``b``.

    An item present in both becomes ``combine(item_from_a, item_from_b)``.
    """
    if a.root is None:
        return b
    if b.root is None:
        return a
    parts = yield from partition(b, a, log=log)
    tagged = yield from _append_pivot(parts.root, combine)
    return (yield from join_batches(Batch(tagged), log=log))


def merge_sort(t: Batch, combine: Callable[[Any, Any], Any] = _left) -> Task:
    """Task: the items of ``t`` sorted; equal items are merged with ``combine``."""
    if t.root is None:
        return Batch(None)
    return (yield from _sort(t.root, combine))


def _sort(v: BatchNode, combine: Callable[[Any, Any], Any]) -> Task:
    yield TICK
    if v.left is None:
        return Batch(v)
    l, r = yield from par2(_sort(v.left, combine), _sort(v.right, combine))
    return (yield from merge(l, r, combine))
