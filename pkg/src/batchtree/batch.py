"""Batches stored as leaf-based height-balanced binary trees (BBTs).

Items live only at leaves.  Internal nodes cache height, leaf count and
the first/last item of their subtree.  Balance is the AVL sibling rule:
child heights differ by at most one.

Also here: the dedicated single-producer/single-consumer queue used by
every pipelined push-down, and the sequential slice/join helpers.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Any, Iterable, Iterator, Sequence

from .runtime import Cell, Task, TICK, read, write


class BatchNode:
    __slots__ = ("left", "right", "height", "size", "first", "last", "item")

    def __init__(self, left: "BatchNode | None" = None, right: "BatchNode | None" = None,
                 item: Any = None) -> None:
        self.left = left
        self.right = right
        if left is None:
            self.height = 0
            self.size = 1
            self.first = self.last = self.item = item
        else:
            self.height = 1 + max(left.height, right.height)
            self.size = left.size + right.size
            self.first = left.first
            self.last = right.last
            self.item = None

    @classmethod
    def leaf(cls, item: Any) -> "BatchNode":
        return cls(item=item)

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def children2(self) -> tuple | None:
        if self.left is None:
            return None
        return self.left, self.right

    def __repr__(self) -> str:
        if self.left is None:
            return f"BatchNode.leaf({self.item!r})"
        return f"BatchNode(h={self.height}, size={self.size}, {self.first!r}..{self.last!r})"


@dataclass(eq=False)
class Batch:
    """A possibly empty batch; ``root`` is ``None`` when empty."""

    root: BatchNode | None = None

    @property
    def size(self) -> int:
        return 0 if self.root is None else self.root.size

    def __len__(self) -> int:
        return self.size

    def __iter__(self) -> Iterator[Any]:
        return iter_leaves(self.root)

    def items(self) -> list:
        return list(iter_leaves(self.root))

    def __repr__(self) -> str:
        return f"Batch({self.items()!r})"


def iter_leaves(node: Any) -> Iterator[Any]:
    """Leaf items of any tree exposing ``children2()``, left to right."""
    if node is None:
        return
    stack = [node]
    while stack:
        v = stack.pop()
        kids = v.children2()
        if kids is None:
            yield v.item
        else:
            stack.extend(reversed(kids))


def leaf_nodes(node: Any) -> list:
    out = []
    if node is None:
        return out
    stack = [node]
    while stack:
        v = stack.pop()
        kids = v.children2()
        if kids is None:
            out.append(v)
        else:
            stack.extend(reversed(kids))
    return out


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def complete_tree(items: Sequence[Any], lo: int = 0, hi: int | None = None) -> BatchNode | None:
    """Complete BBT over ``items[lo:hi]``: every level full except perhaps the last."""
    if hi is None:
        hi = len(items)
    if hi <= lo:
        return None
    if hi - lo == 1:
        return BatchNode(item=items[lo])
    mid = lo + (hi - lo + 1) // 2
    return BatchNode(complete_tree(items, lo, mid), complete_tree(items, mid, hi))


def batch_of(items: Iterable[Any]) -> Batch:
    """A complete batch holding ``items`` in the given order (no sortedness check)."""
    items = list(items)
    return Batch(complete_tree(items))


def batch_from_sorted(items: Iterable[Any]) -> Batch:
    items = list(items)
    for a, b in zip(items, items[1:]):
        if not a < b:
            raise ValueError(f"items must be strictly increasing: {a!r} before {b!r}")
    return Batch(complete_tree(items))


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


def batch_violations(node: BatchNode | None, *, sorted_items: bool = False,
                     balanced: bool = True) -> list[str]:
    """Every broken BatchNode invariant under ``node``, as messages."""
    out: list[str] = []
    if node is None:
        return out
    prev: list = []

    def walk(v: BatchNode, path: str) -> None:
        if v.left is None:
            if v.right is not None:
                out.append(f"{path}: leaf with a right child")
            if v.height != 0 or v.size != 1:
                out.append(f"{path}: leaf height/size {v.height}/{v.size}")
            if not (v.first == v.item and v.last == v.item):
                out.append(f"{path}: leaf first/last disagree with item")
            if sorted_items and prev and not prev[0] < v.item:
                out.append(f"{path}: item {v.item!r} not above {prev[0]!r}")
            prev[:] = [v.item]
            return
        if v.right is None:
            out.append(f"{path}: internal node with one child")
            return
        walk(v.left, path + "L")
        walk(v.right, path + "R")
        if v.height != 1 + max(v.left.height, v.right.height):
            out.append(f"{path}: height {v.height} wrong")
        if v.size != v.left.size + v.right.size:
            out.append(f"{path}: size {v.size} wrong")
        if v.first != v.left.first or v.last != v.right.last:
            out.append(f"{path}: first/last wrong")
        if balanced and abs(v.left.height - v.right.height) > 1:
            out.append(f"{path}: unbalanced ({v.left.height} vs {v.right.height})")

    walk(node, "^")
    return out


def is_complete(node: BatchNode | None) -> bool:
    """All leaves sit on the last two levels."""
    if node is None:
        return True
    depths = []
    stack = [(node, 0)]
    while stack:
        v, d = stack.pop()
        if v.left is None:
            depths.append(d)
        else:
            stack.append((v.left, d + 1))
            stack.append((v.right, d + 1))
    return min(depths) >= node.height - 1 and max(depths) == node.height


# ---------------------------------------------------------------------------
# sequential joins
# ---------------------------------------------------------------------------


def _node(left: BatchNode, right: BatchNode) -> BatchNode:
    """Node over two subtrees whose heights differ by at most two, rebalanced."""
    hl, hr = left.height, right.height
    if hl > hr + 1:
        if left.left.height >= left.right.height:
            return BatchNode(left.left, BatchNode(left.right, right))
        lr = left.right
        return BatchNode(BatchNode(left.left, lr.left), BatchNode(lr.right, right))
    if hr > hl + 1:
        if right.right.height >= right.left.height:
            return BatchNode(BatchNode(left, right.left), right.right)
        rl = right.left
        return BatchNode(BatchNode(left, rl.left), BatchNode(rl.right, right.right))
    return BatchNode(left, right)


def _join_right(left: BatchNode, right: BatchNode) -> BatchNode:
    if left.height <= right.height + 1:
        return BatchNode(left, right)
    return _node(left.left, _join_right(left.right, right))


def _join_left(left: BatchNode, right: BatchNode) -> BatchNode:
    if right.height <= left.height + 1:
        return BatchNode(left, right)
    return _node(_join_left(left, right.left), right.right)


def bbt_join(left: BatchNode | None, right: BatchNode | None) -> BatchNode | None:
    """Concatenate two BBTs in O(|height difference| + 1) time, copying only the path."""
    if left is None:
        return right
    if right is None:
        return left
    if left.height > right.height + 1:
        return _join_right(left, right)
    if right.height > left.height + 1:
        return _join_left(left, right)
    return BatchNode(left, right)


# ---------------------------------------------------------------------------
# slices
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class Slice:
    """Ordered sequence of disjoint, pairwise non-sibling subtrees covering consecutive leaves."""

    subtrees: list

    def __len__(self) -> int:
        return len(self.subtrees)

    def leaf_count(self) -> int:
        return sum(t.size for t in self.subtrees)


def slice_of(b: Batch, lo: int, hi: int) -> Slice:
    """Minimal ordered slice covering leaf ranks ``lo..hi`` inclusive."""
    if b.root is None or not 0 <= lo <= hi < b.size:
        raise IndexError(f"leaf range [{lo}, {hi}] outside batch of size {b.size}")
    out: list = []

    def walk(v: BatchNode, start: int) -> None:
        end = start + v.size - 1
        if end < lo or start > hi:
            return
        if lo <= start and end <= hi:
            out.append(v)
            return
        walk(v.left, start)
        walk(v.right, start + v.left.size)

    walk(b.root, 0)
    return Slice(out)


def slice_join(s: Slice | Sequence[BatchNode]) -> Batch:
    """Join an ordered slice into one BBT in O(log(k+1)) sequential time.

    The slice rises then falls in height; the rising prefix is folded
    shortest-first from the left end, the falling suffix from the right.
    """
    trees = list(s.subtrees if isinstance(s, Slice) else s)
    if not trees:
        return Batch(None)
    peak = max(range(len(trees)), key=lambda i: trees[i].height)
    left = None
    for t in trees[: peak + 1]:
        left = bbt_join(left, t)
    right = None
    for t in reversed(trees[peak + 1:]):
        right = bbt_join(t, right)
    return Batch(bbt_join(left, right))


def slice_count_bound(k: int, c: float = 4.0) -> float:
    return c * math.log2(k + 1)


def check_log_splitting(b: Batch | BatchNode | None, trials: int | None = None,
                        c: float = 4.0, seed: int = 0) -> bool:
    """True iff every examined slice with ``k`` leaves has at most ``c*log2(k+1)`` subtrees.

    ``trials=None`` examines all leaf ranges; otherwise ``trials`` random ranges.
    Works for any full binary tree of BatchNodes, balanced or not.
    """
    root = b.root if isinstance(b, Batch) else b
    if root is None or root.left is None:
        return True
    n = root.size
    probe = Batch(root)
    if trials is None:
        ranges: Iterable = ((lo, hi) for lo in range(n) for hi in range(lo, n))
    else:
        rng = random.Random(seed)
        ranges = (tuple(sorted((rng.randrange(n), rng.randrange(n)))) for _ in range(trials))
    for lo, hi in ranges:
        k = hi - lo + 1
        if len(slice_of(probe, lo, hi)) > slice_count_bound(k, c):
            return False
    return True


# ---------------------------------------------------------------------------
# dedicated queue
# ---------------------------------------------------------------------------


class _QNode:
    __slots__ = ("value", "next")

    def __init__(self) -> None:
        self.value = Cell(None, "queue")
        self.next = Cell(None, "queue")


class DedicatedQueue:
    """FIFO that is correct under one concurrent pusher and one concurrent popper.

    The chain always ends in a blank tail node; ``push`` fills the tail and
    links a fresh blank one.
    """

    __slots__ = ("head", "tail")

    def __init__(self) -> None:
        blank = _QNode()
        self.head = Cell(blank, "queue")
        self.tail = Cell(blank, "queue")

    def snapshot(self) -> list:
        """Queued values, front first.  Only meaningful when quiescent."""
        out = []
        h = self.head.value
        while h.next.value is not None:
            out.append(h.value.value)
            h = h.next.value
        return out

    def empty(self) -> bool:
        return self.head.value.next.value is None


def queue_push(q: DedicatedQueue, x: Any) -> Task:
    w = _QNode()
    yield TICK
    tail = yield read(q.tail)
    yield write(tail.value, x)
    yield write(tail.next, w)
    yield write(q.tail, w)


def queue_pop(q: DedicatedQueue) -> Task:
    """Pop the front value, or ``None`` if the queue is empty."""
    h = yield read(q.head)
    nxt = yield read(h.next)
    if nxt is None:
        return None
    value = yield read(h.value)
    yield write(q.head, nxt)
    return value
