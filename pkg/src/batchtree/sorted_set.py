"""Persistent sorted sets on 2-3 trees: intersection, union and difference.

A :class:`SetHandle` wraps a finished tree that is never changed again.
Each operation feeds the smaller set into the larger one as a batch of
searches, insertions or deletions, applied to a spine snapshot of the
larger tree, and returns a new handle.  Unchanged subtrees are shared.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterable

from .batch import Batch, BatchNode
from .batch_ops import filter as filter_batch
from .ptree.access import DELETE, INSERT, SEARCH, Access, Op
from .ptree.nodes import TreeNode, copy_spines
from .ptree.tree import PTree, batch_join_instances, execute
from .runtime import TICK, Task, par2


@dataclass(frozen=True, eq=False)
class SetHandle:
    tree: PTree

    @classmethod
    def of(cls, items: Iterable[Any]) -> "SetHandle":
        return cls(PTree.from_sorted(sorted(set(items)), parents=False))

    @classmethod
    def empty(cls) -> "SetHandle":
        return cls(PTree(None, 0, parents=False))

    @property
    def size(self) -> int:
        return self.tree.size

    def __len__(self) -> int:
        return self.tree.size

    def items(self) -> list:
        return self.tree.items()

    def to_csv(self) -> str:
        return self.tree.to_csv()


def _clone_leaf(v: TreeNode) -> TreeNode:
    c = TreeNode.leaf(v.item, v.payload)
    c.touched = False
    return c


def spine_snapshot(x: PTree) -> PTree:
    """A copy of ``x`` with fresh root and spine nodes (leaf ends included).

    Everything off the two spines is shared with ``x``.
    """
    root = x.root
    if root is None:
        return PTree(None, 0, parents=False)
    if root.height == 0:
        return PTree(_clone_leaf(root), 1, parents=False)
    root = copy_spines(root)
    fresh = [root]
    v = root
    while v.left.height > 0:
        v = v.left
        fresh.append(v)
    v.left = _clone_leaf(v.left)
    v = root
    while v.right.height > 0:
        v = v.right
        fresh.append(v)
    v.right = _clone_leaf(v.right)
    for v in fresh:
        v.touched = False
    return PTree(root, x.size, parents=False)


def _accesses(v: Any, kind: str) -> Task:
    """Task: batch (BatchNode tree) of single-op accesses over the leaves under ``v``."""
    yield TICK
    kids = v.children2()
    if kids is None:
        return BatchNode(item=Access(v.item, [Op(kind, v.item, v.payload)]))
    l, r = yield from par2(_accesses(kids[0], kind), _accesses(kids[1], kind))
    return BatchNode(l, r)


def _apply_set(target: SetHandle, source: SetHandle, kind: str) -> Task:
    """Task: snapshot of ``target`` after one ``kind`` op per item of ``source``."""
    snap = spine_snapshot(target.tree)
    if source.tree.root is None:
        return snap, Batch(None)
    accesses = yield from _accesses(source.tree.root, kind)
    batch = Batch(accesses)
    yield from execute(snap, batch)
    return snap, batch


def _singletons(v: BatchNode, payload_from_op: bool) -> Task:
    yield TICK
    if v.left is None:
        op = v.item.ops[0]
        payload = op.value if payload_from_op else op.payload
        return BatchNode(item=PTree(TreeNode.leaf(op.key, payload), 1, parents=False))
    l, r = yield from par2(_singletons(v.left, payload_from_op),
                           _singletons(v.right, payload_from_op))
    return BatchNode(l, r)


def _found(access: Access) -> bool:
    return bool(access.ops[0].found)


def intersection(x: SetHandle, y: SetHandle) -> Task:
    """Task: items in both sets, with payloads taken from ``x``."""
    if x.size == 0 or y.size == 0:
        return SetHandle.empty()
    small_is_x = x.size <= y.size
    small, large = (x, y) if small_is_x else (y, x)
    _snap, batch = yield from _apply_set(large, small, SEARCH)
    hits = yield from filter_batch(batch.root, _found)
    if hits.root is None:
        return SetHandle.empty()
    singles = yield from _singletons(hits.root, payload_from_op=not small_is_x)
    tree = yield from batch_join_instances(Batch(singles))
    return SetHandle(tree)


def union(x: SetHandle, y: SetHandle) -> Task:
    """Task: items in either set; on a shared item the larger set's payload wins."""
    small, large = (x, y) if x.size <= y.size else (y, x)
    snap, _ = yield from _apply_set(large, small, INSERT)
    return SetHandle(snap)


def difference(x: SetHandle, y: SetHandle) -> Task:
    """Task: items of ``x`` not in ``y``."""
    if y.size <= x.size:
        snap, _ = yield from _apply_set(x, y, DELETE)
        return SetHandle(snap)
    common = yield from intersection(x, y)
    snap, _ = yield from _apply_set(x, common, DELETE)
    return SetHandle(snap)
