"""Pipelined joining of 2-3 trees.

``join23(L, R, done)`` returns the root of ``L + R`` after doing only a
constant amount of work itself.  When the shorter tree has to travel
down the taller one's spine, it is queued at a spine node and processed
one level at a time by that node's ``joinin`` procedure, which runs under
a reactivation wrapper.  Spine structures are updated eagerly when a tree
is fed, so every overflow is known in advance and a blank node is placed
where the overflowing half will land.  ``done`` is notified once the
shorter tree has been absorbed.

All mutated nodes are flagged ``touched`` so that a later pass can
recompute cached first/last items and parent links.
"""

from __future__ import annotations

import functools

from ..batch import DedicatedQueue, queue_pop, queue_push
from ..runtime import (
    TICK, Barrier, NonBlockingLock, ReactivationWrapper, Task, barrier_notify, barrier_wait, count,
    par2, reactivate,
)
from .nodes import TreeNode, lspine_of, rspine_of


def init_left(x: TreeNode) -> None:
    """Prepare ``x`` to sit on a left spine and absorb trees from the left."""
    if x.height == 0:
        return
    x.spine = lspine_of(x)
    x.queue = DedicatedQueue()
    x.joinin = ReactivationWrapper(functools.partial(_join_left_run, x), "reactivation")
    x.touched = True


def init_right(x: TreeNode) -> None:
    """Prepare ``x`` to sit on a right spine and absorb trees from the right."""
    if x.height == 0:
        return
    x.spine = rspine_of(x)
    x.queue = DedicatedQueue()
    x.joinin = ReactivationWrapper(functools.partial(_join_right_run, x), "reactivation")
    x.touched = True


def init_spines(x: TreeNode | None) -> None:
    """Init every non-root spine node of ``x``, leaf to root (spines must be private)."""
    if x is None or x.height == 0:
        return
    path = []
    v = x.left
    while v.height > 0:
        path.append(v)
        v = v.left
    for v in reversed(path):
        init_left(v)
    path = []
    v = x.right
    while v.height > 0:
        path.append(v)
        v = v.right
    for v in reversed(path):
        init_right(v)


def _sjoin(left: TreeNode, right: TreeNode) -> TreeNode:
    return TreeNode(left, None, right)


def _rjoin(left: TreeNode, right: TreeNode) -> TreeNode:
    j = TreeNode(left, None, right)
    init_left(left)
    init_right(right)
    return j


def _fill(blank: TreeNode, left: TreeNode, right: TreeNode) -> None:
    """Copy the root of ``SJoin(left, right)`` into a blank node."""
    blank.left = left
    blank.mid = None
    blank.right = right
    blank.touched = True


def _feed_right(x: TreeNode, v: TreeNode) -> Task:
    count("joinin_feeds")
    yield from queue_push(v.queue, x)
    yield from reactivate(v.joinin)
    s = v.spine
    v.spine = (s - s % x.weight + x.weight) % v.weight + rspine_of(x)
    v.touched = True


def _feed_left(x: TreeNode, v: TreeNode) -> Task:
    count("joinin_feeds")
    yield from queue_push(v.queue, x)
    yield from reactivate(v.joinin)
    s = v.spine
    v.spine = (s - s % x.weight + x.weight) % v.weight + lspine_of(x)
    v.touched = True


def join23(left: TreeNode | None, right: TreeNode | None, done: Barrier) -> Task:
    """Task: root of the join of two root 2-3 trees; ``done`` fires when absorbed."""
    yield TICK
    count("joins")
    if left is None:
        yield from barrier_notify(done)
        return right
    if right is None:
        yield from barrier_notify(done)
        return left
    if left.height == right.height:
        yield from barrier_notify(done)
        return _rjoin(left, right)
    if left.height > right.height:
        return (yield from _join_into_left(left, right, done))
    return (yield from _join_into_right(left, right, done))


def _join_into_left(l: TreeNode, r: TreeNode, done: Barrier) -> Task:
    init_right(r)
    l.touched = True
    if l.right.height == r.height:
        yield from barrier_notify(done)
        if l.mid is None:
            l.mid = l.right
            l.right = r
            return l
        return _rjoin(_sjoin(l.left, l.mid), _sjoin(l.right, r))
    r.joined = done
    r.overflow = None
    if l.right.spine + r.weight >= l.right.weight:
        x = TreeNode.blank(l.right.height)
        r.overflow = x
        yield from _feed_right(r, l.right)
        if l.mid is None:
            l.mid = x
            return l
        return _rjoin(_sjoin(l.left, l.mid), _sjoin(x, l.right))
    yield from _feed_right(r, l.right)
    return l


def _join_into_right(l: TreeNode, r: TreeNode, done: Barrier) -> Task:
    init_left(l)
    r.touched = True
    if r.left.height == l.height:
        yield from barrier_notify(done)
        if r.mid is None:
            r.mid = r.left
            r.left = l
            return r
        return _rjoin(_sjoin(l, r.left), _sjoin(r.mid, r.right))
    l.joined = done
    l.overflow = None
    if r.left.spine + l.weight >= r.left.weight:
        x = TreeNode.blank(r.left.height)
        l.overflow = x
        yield from _feed_left(l, r.left)
        if r.mid is None:
            r.mid = x
            return r
        return _rjoin(_sjoin(r.left, x), _sjoin(r.mid, r.right))
    yield from _feed_left(l, r.left)
    return r


def _join_right_run(l: TreeNode) -> Task:
    """One step of absorbing a queued tree arriving from the right at spine node ``l``."""
    r = yield from queue_pop(l.queue)
    if r is None:
        return
    count("joinin_runs")
    yield TICK
    l.touched = True
    if l.right.height == r.height:
        if l.mid is None:
            l.mid = l.right
            l.right = r
        else:
            _fill(r.overflow, l.left, l.mid)
            l.left = l.right
            l.mid = None
            l.right = r
        yield from barrier_notify(r.joined)
    else:
        if l.right.spine + r.weight >= l.right.weight:
            x = TreeNode.blank(l.right.height)
            if l.mid is None:
                l.mid = x
            else:
                _fill(r.overflow, l.left, l.mid)
                l.left = x
                l.mid = None
            r.overflow = x
        yield from _feed_right(r, l.right)
    yield from reactivate(l.joinin)


def _join_left_run(r: TreeNode) -> Task:
    """Mirror image of :func:`_join_right_run` for trees arriving from the left."""
    l = yield from queue_pop(r.queue)
    if l is None:
        return
    count("joinin_runs")
    yield TICK
    r.touched = True
    if r.left.height == l.height:
        if r.mid is None:
            r.mid = r.left
            r.left = l
        else:
            _fill(l.overflow, r.mid, r.right)
            r.right = r.left
            r.mid = None
            r.left = l
        yield from barrier_notify(l.joined)
    else:
        if r.left.spine + l.weight >= r.left.weight:
            x = TreeNode.blank(r.left.height)
            if r.mid is None:
                r.mid = x
            else:
                _fill(l.overflow, r.mid, r.right)
                r.right = x
                r.mid = None
            l.overflow = x
        yield from _feed_left(l, r.left)
    yield from reactivate(r.joinin)


# ---------------------------------------------------------------------------
# after the joining phase
# ---------------------------------------------------------------------------


def refresh(v: TreeNode, parents: bool) -> Task:
    """Task: repair cached fields below ``v`` on every touched node.

    Recomputes first/last bottom-up, links children to parents (when
    ``parents``), ensures lock cells exist and drops per-join scratch state.
    Only touched nodes are visited; their untouched descendants are intact.
    Returns the number of nodes visited.
    """
    yield TICK
    v.touched = False
    # queue and joinin stay: a joinin loop may still make one empty pop
    v.overflow = None
    v.joined = None
    if parents and v.marked is None:
        v.marked = NonBlockingLock("marked")
        v.hmarked = NonBlockingLock("marked")
    if v.height == 0:
        return 1
    kids = v.children()
    visited = 1
    pending = [c for c in kids if c.touched]
    if len(pending) == 1:
        visited += yield from refresh(pending[0], parents)
    elif len(pending) == 2:
        a, b = yield from par2(refresh(pending[0], parents), refresh(pending[1], parents))
        visited += a + b
    elif len(pending) == 3:
        a, (b, c) = yield from par2(
            refresh(pending[0], parents),
            par2(refresh(pending[1], parents), refresh(pending[2], parents)))
        visited += a + b + c
    for c in kids:
        if parents:
            c.parent = v
        if c.height == 0:
            # a leaf fed as a one-leaf tree keeps its scratch fields
            c.overflow = c.joined = None
    v.first = v.left.first
    v.last = v.right.last
    return visited


def wait_all(barriers: list) -> Task:
    """Task: wait on every barrier in ``barriers`` (by parallel halving)."""
    if not barriers:
        return
    if len(barriers) == 1:
        yield from barrier_wait(barriers[0])
        return
    mid = len(barriers) // 2
    yield from par2(wait_all(barriers[:mid]), wait_all(barriers[mid:]))
