"""Batched accesses on a 2-3 tree: sorted access execution and unsorted search.

A raw :class:`Op` is one search/update/insert/delete and doubles as its own
result slot.  :func:`coalesce` groups a key-sorted op sequence into one
:class:`Access` per distinct key; executing an access replays its ops in
order against that key's state, so duplicate keys in a batch behave
exactly as if the ops were applied one after another.
"""

from __future__ import annotations

from typing import Any, Iterable

from ..batch import Batch, BatchNode, batch_of
from ..batch_ops import PNode, drain_pieces, filter as filter_batch, mirror_pivots, start_partition
from ..runtime import TICK, Barrier, Task, barrier_wait, count, par2, tick
from .joining import init_spines, join23
from .nodes import (
    ItemHandle, TreeNode, as_tree, copy_spines, find, join, join_cost, split,
)

SEARCH = "search"
UPDATE = "update"
INSERT = "insert"
DELETE = "delete"
KINDS = (SEARCH, UPDATE, INSERT, DELETE)


class Op:
    """One access and its result slot (``found``, ``value``, ``handle``)."""

    __slots__ = ("kind", "key", "payload", "found", "value", "handle")

    def __init__(self, kind: str, key: Any, payload: Any = None) -> None:
        if kind not in KINDS:
            raise ValueError(f"unknown access kind {kind!r}")
        self.kind = kind
        self.key = key
        self.payload = payload
        self.found: bool | None = None
        self.value: Any = None
        self.handle: ItemHandle | None = None

    def result(self) -> tuple:
        """``(found, value)``; handles are compared separately."""
        return self.found, self.value

    def __repr__(self) -> str:
        return f"Op({self.kind}, {self.key!r})"


class Access:
    """All ops on one key, in their original order, plus the net effect's kind."""

    __slots__ = ("key", "ops", "kind")

    def __init__(self, key: Any, ops: list) -> None:
        self.key = key
        self.ops = ops
        self.kind = effective_kind(ops)

    def __lt__(self, other: "Access") -> bool:
        return self.key < other.key

    def __repr__(self) -> str:
        return f"Access({self.kind}, {self.key!r}, {len(self.ops)} ops)"


def effective_kind(ops: list) -> str:
    """Kind of the single access with the same net effect as ``ops``.

    The last insert/delete decides membership; otherwise any update makes
    it an update; otherwise it is a search.
    """
    kind = SEARCH
    for op in ops:
        if op.kind in (INSERT, DELETE):
            kind = op.kind
        elif op.kind == UPDATE and kind == SEARCH:
            kind = UPDATE
    return kind


def coalesce(ops: Iterable[Op]) -> Batch:
    """Group key-sorted ops into a batch of :class:`Access`, one per distinct key."""
    runs: list = []
    prev = None
    for op in ops:
        if runs and op.key == prev:
            runs[-1].append(op)
            continue
        if runs and not prev < op.key:
            raise ValueError(f"ops must be sorted by key: {op.key!r} after {prev!r}")
        runs.append([op])
        prev = op.key
    return batch_of(Access(run[0].key, run) for run in runs)


def sort_ops(ops: Iterable[Op]) -> list:
    """Stable sort by key, keeping same-key ops in their given order."""
    return sorted(ops, key=lambda op: op.key)


def replay(access: Access, leaf: TreeNode | None) -> tuple[bool, TreeNode | None]:
    """Apply ``access``'s ops to one key's state; fill every op's result slot.

    ``leaf`` is the key's current leaf, if present.  Returns whether the
    key's membership or leaf changed, and the leaf it should end with.
    """
    present = leaf is not None
    payload = leaf.payload if present else None
    cur = leaf
    for op in access.ops:
        kind = op.kind
        if kind == SEARCH:
            op.found = present
            op.value = payload if present else None
        elif kind == UPDATE:
            op.found = present
            op.value = payload if present else None
            if present:
                payload = op.payload
        elif kind == INSERT:
            op.found = present
            op.value = payload if present else None
            if not present:
                present = True
                payload = op.payload
                cur = TreeNode.leaf(access.key, payload)
        else:
            op.found = present
            op.value = payload if present else None
            if present:
                present = False
                payload = None
                cur = None
        op.handle = ItemHandle(cur) if present else None
    if cur is not None:
        cur.payload = payload
    return cur is not leaf, cur


def _steps(k: int) -> tuple:
    """Charge ``k`` sequential tree-node steps."""
    count("tree_steps", k)
    return tick(k)


def _apply(x: TreeNode | None, access: Access) -> Task:
    """Task: run ``access`` on the 2-3 tree ``x``; returns (new tree, size delta)."""
    h = x.height + 1 if x is not None else 1
    yield _steps(h)
    leaf = find(x, access.key)
    changed, cur = replay(access, leaf)
    if not changed:
        return x, 0
    yield _steps(2 * h)
    lt, _eq, gt = split(x, access.key)
    if cur is None:
        return join(lt, gt), -1
    mid = join(lt, cur)
    return join(mid, gt), (0 if leaf is not None else 1)


def _join_pieces(outer: list, inner: list) -> Task:
    left = None
    for b in outer:
        t = as_tree(b)
        yield _steps(join_cost(left, t))
        left = join(left, t)
    right = None
    for b in reversed(inner):
        t = as_tree(b)
        yield _steps(join_cost(t, right))
        right = join(t, right)
    yield _steps(join_cost(left, right))
    return join(left, right)


def _collate(v: PNode) -> Task:
    yield TICK
    if v.left is None:
        outer, inner = yield from drain_pieces(v)
        x = yield from _join_pieces(outer, inner)
        x, delta = yield from _apply(x, v.data.item)
        if x is not None:
            yield _steps(x.height + 1)
            x = copy_spines(x)
            init_spines(x)
        return x, delta
    (l, dl), (r, dr) = yield from par2(_collate(v.left), _collate(v.right))
    v.aux = Barrier()
    j = yield from join23(l, r, v.aux)
    return j, dl + dr


def _finalize(v: PNode) -> Task:
    if v.left is None:
        return
    yield from par2(_finalize(v.left), _finalize(v.right))
    yield from barrier_wait(v.aux)


def _access_key(leaf: BatchNode) -> Any:
    return leaf.item.key


def execute_root(root: TreeNode | None, accesses: Batch, *, log: list | None = None) -> Task:
    """Task: run a coalesced access batch on the tree at ``root``.

    Returns ``(new_root, size_delta)`` once all joining has finished.  The
    new root's cached fields are not yet refreshed.
    """
    if accesses.root is None:
        return root, 0
    mirror = yield from mirror_pivots(accesses.root, _access_key, log)
    yield from start_partition(mirror, root, log)
    new_root, delta = yield from _collate(mirror)
    yield from _finalize(mirror)
    return new_root, delta


# ---------------------------------------------------------------------------
# unsorted search
# ---------------------------------------------------------------------------


class Probe:
    """One unsorted search and its result."""

    __slots__ = ("key", "found", "handle")

    def __init__(self, key: Any) -> None:
        self.key = key
        self.found = False
        self.handle: ItemHandle | None = None

    def __repr__(self) -> str:
        return f"Probe({self.key!r}, found={self.found})"


def _wrap(v: BatchNode) -> Task:
    yield TICK
    if v.left is None:
        return BatchNode(item=Probe(v.item))
    l, r = yield from par2(_wrap(v.left), _wrap(v.right))
    return BatchNode(l, r)


def _tag(b: BatchNode, leaf: TreeNode) -> Task:
    yield TICK
    if b.left is None:
        p = b.item
        if p.key == leaf.item:
            p.found = True
            p.handle = ItemHandle(leaf)
        return
    yield from par2(_tag(b.left, leaf), _tag(b.right, leaf))


def _usearch(v: Any, b: BatchNode | None) -> Task:
    if b is None:
        return
    yield TICK
    kids = v.children2()
    if kids is None:
        yield from _tag(b, v)
        return
    pivot = kids[0].last
    lo, hi = yield from par2(filter_batch(b, lambda p: p.key <= pivot),
                             filter_batch(b, lambda p: p.key > pivot))
    yield from par2(_usearch(kids[0], lo.root), _usearch(kids[1], hi.root))


def usearch_root(root: TreeNode | None, keys: Batch) -> Task:
    """Task: a batch of :class:`Probe`, in the order of ``keys``, tagged against ``root``."""
    if keys.root is None:
        return Batch(None)
    probes = yield from _wrap(keys.root)
    if root is not None:
        yield from _usearch(root, probes)
    return Batch(probes)
