"""The user-facing 2-3 tree and its batch operations.

Every batch operation here is a task; run it with
``runtime.run_recorded(op(...))`` or ``runtime.run(op(...), backend)``.
"""

from __future__ import annotations

import csv
import io
from typing import Any, Iterable

from ..batch import Batch, BatchNode, batch_of
from ..batch_ops import balance
from ..runtime import (
    TICK, Barrier, NonBlockingLock, Task, barrier_wait, count, par2, read, try_lock, unlock,
)
from . import access as _access
from .joining import init_spines, join23, refresh
from .nodes import (
    Half, ItemHandle, TreeNode, build_from_leaves, copy_spines, find, fix_spines, iter_nodes, leaves,
    lspine, rspine,
)


class PTree:
    """A 2-3 tree of distinct, totally ordered items, each with an optional payload.

    ``parents`` turns on parent links and per-node mark locks, which
    :func:`reverse_index` needs.
    """

    __slots__ = ("root", "size", "parents")

    def __init__(self, root: TreeNode | None = None, size: int = 0, parents: bool = True) -> None:
        self.root = root
        self.size = size
        self.parents = parents

    @classmethod
    def from_sorted(cls, items: Iterable[Any], payloads: Iterable[Any] | None = None,
                    parents: bool = True) -> "PTree":
        items = list(items)
        for a, b in zip(items, items[1:]):
            if not a < b:
                raise ValueError(f"items must be strictly increasing: {a!r} before {b!r}")
        pay = list(payloads) if payloads is not None else [None] * len(items)
        if len(pay) != len(items):
            raise ValueError("payloads and items differ in length")
        root = build_from_leaves([TreeNode.leaf(k, p) for k, p in zip(items, pay)])
        fix_spines(root)
        t = cls(root, len(items), parents)
        t._settle()
        return t

    def _settle(self) -> None:
        """Sequential equivalent of the post-join refresh over the whole tree."""
        if self.root is None:
            return
        for v in iter_nodes(self.root):
            v.touched = False
            v.queue = v.joinin = v.overflow = v.joined = None
            if self.parents:
                if v.marked is None:
                    v.marked = _lock()
                    v.hmarked = _lock()
                for c in v.children():
                    c.parent = v
        self.root.parent = None

    def __len__(self) -> int:
        return self.size

    def __iter__(self):
        return iter(self.items())

    def __contains__(self, key: Any) -> bool:
        return find(self.root, key) is not None

    def items(self) -> list:
        return [v.item for v in leaves(self.root)]

    def pairs(self) -> list:
        return [(v.item, v.payload) for v in leaves(self.root)]

    @property
    def height(self) -> int:
        return -1 if self.root is None else self.root.height

    def handle(self, key: Any) -> ItemHandle | None:
        """Sequential lookup of ``key``'s handle (a convenience, not a batch op)."""
        leaf = find(self.root, key)
        return None if leaf is None else ItemHandle(leaf)

    def to_csv(self, out: io.TextIOBase | None = None) -> str:
        """Sorted ``item,payload`` rows."""
        buf = out if out is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["item", "payload"])
        for k, p in self.pairs():
            w.writerow([k, "" if p is None else p])
        return buf.getvalue() if out is None else ""

    def dump(self) -> str:
        """Indented text picture of the tree, one node per line."""
        lines: list[str] = []

        def walk(v: TreeNode, depth: int) -> None:
            pad = "  " * depth
            if v.height == 0:
                lines.append(f"{pad}{v.item!r}")
                return
            lines.append(f"{pad}[{len(v.children())}] {v.first!r}..{v.last!r}")
            for c in v.children():
                walk(c, depth + 1)

        if self.root is not None:
            walk(self.root, 0)
        return "\n".join(lines)

    def validate(self, *, check_spines: bool = True) -> list[str]:
        return tree_violations(self, check_spines=check_spines)

    def __repr__(self) -> str:
        return f"PTree(size={self.size}, height={self.height})"


def _lock() -> NonBlockingLock:
    return NonBlockingLock("marked")


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def tree_violations(t: PTree, *, check_spines: bool = True) -> list[str]:
    """Every broken invariant of ``t`` as a message; empty means valid."""
    out: list[str] = []
    root = t.root
    if root is None:
        if t.size != 0:
            out.append(f"empty tree with size {t.size}")
        return out
    prev: list = []
    nleaves = 0

    def walk(v: TreeNode, path: str, parent: TreeNode | None) -> None:
        nonlocal nleaves
        if v.touched or v.overflow is not None or (v.queue is not None and not v.queue.empty()):
            out.append(f"{path}: leftover joining state")
        if t.parents and v.parent is not parent:
            out.append(f"{path}: parent link wrong")
        if t.parents and v.marked is None:
            out.append(f"{path}: no mark lock")
        if v.weight != 1 << v.height:
            out.append(f"{path}: weight {v.weight} for height {v.height}")
        if v.height == 0:
            if v.left is not None or v.mid is not None or v.right is not None:
                out.append(f"{path}: leaf with children")
            if v.first != v.item or v.last != v.item:
                out.append(f"{path}: leaf first/last wrong")
            if prev and not prev[0] < v.item:
                out.append(f"{path}: item {v.item!r} not above {prev[0]!r}")
            prev[:] = [v.item]
            nleaves += 1
            return
        if v.left is None or v.right is None:
            out.append(f"{path}: blank or one-child node at height {v.height}")
            return
        for name, c in (("L", v.left), ("M", v.mid), ("R", v.right)):
            if c is None:
                continue
            if c.height != v.height - 1:
                out.append(f"{path}{name}: height {c.height} under height {v.height}")
                return
        for name, c in (("L", v.left), ("M", v.mid), ("R", v.right)):
            if c is not None:
                walk(c, path + name, v)
        if v.first != v.left.first or v.last != v.right.last:
            out.append(f"{path}: cached first/last wrong")

    walk(root, "^", None)
    if nleaves != t.size:
        out.append(f"size {t.size} but {nleaves} leaves")
    if check_spines:
        v, path = root.left, "^L"
        while v is not None and v.height > 0:
            if v.spine != lspine(v):
                out.append(f"{path}: left spine {v.spine:b} should be {lspine(v):b}")
            v, path = v.left, path + "L"
        v, path = root.right, "^R"
        while v is not None and v.height > 0:
            if v.spine != rspine(v):
                out.append(f"{path}: right spine {v.spine:b} should be {rspine(v):b}")
            v, path = v.right, path + "R"
    return out


# ---------------------------------------------------------------------------
# batch operations
# ---------------------------------------------------------------------------


def _finish(t: PTree, root: TreeNode | None) -> Task:
    if root is not None:
        if root.touched:
            yield from refresh(root, t.parents)
        root.parent = None
    t.root = root


def execute(t: PTree, accesses: Batch, *, log: list | None = None) -> Task:
    """Task: apply a coalesced batch of accesses (see ``access.coalesce``) to ``t``.

    Results land in each op's ``found``/``value``/``handle`` slots.
    """
    root, delta = yield from _access.execute_root(t.root, accesses, log=log)
    yield from _finish(t, root)
    t.size += delta


def apply_ops(t: PTree, ops: Iterable[_access.Op], *, log: list | None = None) -> Task:
    """Task: sort, coalesce and execute raw ops; returns the ops in their given order."""
    ops = list(ops)
    yield from execute(t, _access.coalesce(_access.sort_ops(ops)), log=log)
    return ops


def usearch(t: PTree, keys: Batch) -> Task:
    """Task: search an unsorted key batch; returns a batch of probes in the same order."""
    return (yield from _access.usearch_root(t.root, keys))


# -- reverse indexing ---------------------------------------------------------


def _climb(v: Any) -> Any:
    """Parent of ``v`` in the binary view, or ``None`` at the root."""
    if isinstance(v, Half):
        return v.node
    p = v.parent
    if p is None:
        return None
    if p.mid is not None and p.left is not v:
        return Half(p)
    return p


def _trace(handle: ItemHandle) -> Task:
    v: Any = handle.node
    while v is not None:
        yield TICK
        if not (yield from try_lock(v.marked)):
            return
        count("marked")
        v = _climb(v)


def _trace_all(b: BatchNode) -> Task:
    if b.left is None:
        yield from _trace(b.item)
        return
    yield TICK
    yield from par2(_trace_all(b.left), _trace_all(b.right))


class _Record:
    __slots__ = ("lock", "done", "kids")

    def __init__(self, lock: Any, done: Barrier | None, kids: tuple) -> None:
        self.lock = lock
        self.done = done
        self.kids = kids


def _is_marked(v: Any) -> Task:
    return (yield read(v.marked.cell))


def _retrieve(v: Any) -> Task:
    yield TICK
    kids = v.children2()
    if kids is None:
        return TreeNode.leaf(v.item, v.payload), _Record(v.marked, None, ())
    a, b = kids
    am = yield from _is_marked(a)
    bm = yield from _is_marked(b)
    if am and not bm:
        u, ra = yield from _retrieve(a)
        return u, _Record(v.marked, None, (ra,))
    if bm and not am:
        u, rb = yield from _retrieve(b)
        return u, _Record(v.marked, None, (rb,))
    (l, ra), (r, rb) = yield from par2(_retrieve(a), _retrieve(b))
    done = Barrier()
    u = yield from join23(l, r, done)
    return u, _Record(v.marked, done, (ra, rb))


def _rfinalize(rec: _Record) -> Task:
    yield TICK
    if rec.lock.probes > 2:
        count("probe_violations")
    rec.lock.probes = 0
    yield from unlock(rec.lock)
    if len(rec.kids) == 1:
        yield from _rfinalize(rec.kids[0])
    elif len(rec.kids) == 2:
        yield from par2(_rfinalize(rec.kids[0]), _rfinalize(rec.kids[1]))
        yield from barrier_wait(rec.done)


def _to_batch(v: Any) -> Task:
    yield TICK
    kids = v.children2()
    if kids is None:
        return BatchNode(item=v.item)
    l, r = yield from par2(_to_batch(kids[0]), _to_batch(kids[1]))
    return BatchNode(l, r)


def reverse_index(t: PTree, handles: Batch) -> Task:
    """Task: the batch of items behind an unsorted batch of distinct handles, sorted.

    Needs ``t.parents``.  Runs in O(b log(n/b + 1)) work.
    """
    if not t.parents:
        raise ValueError("reverse indexing needs a tree built with parents=True")
    if handles.root is None or t.root is None:
        return Batch(None)
    yield from _trace_all(handles.root)
    u, rec = yield from _retrieve(t.root)
    yield from _rfinalize(rec)
    yield from refresh(u, False)
    raw = yield from _to_batch(u)
    return (yield from balance(Batch(raw)))


# -- joining many trees ---------------------------------------------------------


def _join_many(b: BatchNode) -> Task:
    yield TICK
    if b.left is None:
        t: PTree = b.item
        x = copy_spines(t.root)
        if x is not None:
            yield TICK
            init_spines(x)
        return x, t.size, None
    (l, nl, rl), (r, nr, rr) = yield from par2(_join_many(b.left), _join_many(b.right))
    done = Barrier()
    j = yield from join23(l, r, done)
    return j, nl + nr, (done, rl, rr)


def _wait_joins(rec: Any) -> Task:
    if rec is None:
        return
    done, a, b = rec
    yield from par2(_wait_joins(a), _wait_joins(b))
    yield from barrier_wait(done)


def batch_join_instances(trees: Batch, parents: bool = False) -> Task:
    """Task: one tree holding every item of a batch of trees, in batch order.

    Leaves are concatenated in batch order whatever the items are; the
    result is a sorted instance only if the inputs were.  Inputs are not
    modified, except that with ``parents`` their nodes' parent links are
    taken over by the result.
    """
    if trees.root is None:
        return PTree(None, 0, parents)
    root, size, rec = yield from _join_many(trees.root)
    yield from _wait_joins(rec)
    out = PTree(None, size, parents)
    yield from _finish(out, root)
    return out


def trees_batch(trees: Iterable[PTree]) -> Batch:
    return batch_of(trees)
