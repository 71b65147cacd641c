"""2-3 tree nodes, their binary view, and sequential (functional) tree algorithms.

A :class:`TreeNode` is a leaf (``item`` set, no children) or has children
``left``/``right`` and optionally ``mid``, all one level lower.  Nodes
also carry the scratch fields used by the pipelined joining scheme.

The binary view used when a 2-3 tree is pushed down another batch maps a
2-node to itself and a 3-node ``(a, b, c)`` to ``(a, Half(b, c))``.

The sequential join/split helpers here never mutate their arguments: they
copy the root-to-splice path and share everything else.  Leaves are never
copied, so a leaf's identity survives every batch operation.
"""

from __future__ import annotations

from typing import Any, Iterator


class TreeNode:
    __slots__ = (
        "left", "mid", "right", "height", "weight", "spine", "queue", "joinin",
        "overflow", "joined", "first", "last", "parent", "marked", "hmarked",
        "touched", "item", "payload",
    )

    def __init__(self, left: "TreeNode | None" = None, mid: "TreeNode | None" = None,
                 right: "TreeNode | None" = None, *, height: int | None = None,
                 item: Any = None, payload: Any = None) -> None:
        self.left = left
        self.mid = mid
        self.right = right
        self.spine = 0
        self.queue = None
        self.joinin = None
        self.overflow = None
        self.joined = None
        self.parent = None
        self.marked = None
        self.hmarked = None
        self.touched = True
        self.item = item
        self.payload = payload
        if left is not None:
            self.height = left.height + 1
            self.first = left.first
            self.last = right.last
        elif height is not None:
            # blank node, filled in later by the joining scheme
            self.height = height
            self.first = self.last = None
        else:
            self.height = 0
            self.first = self.last = item
        self.weight = 1 << self.height

    @classmethod
    def leaf(cls, item: Any, payload: Any = None) -> "TreeNode":
        return cls(item=item, payload=payload)

    @classmethod
    def blank(cls, height: int) -> "TreeNode":
        return cls(height=height)

    @property
    def is_leaf(self) -> bool:
        return self.height == 0

    def children(self) -> tuple:
        if self.left is None:
            return ()
        if self.mid is None:
            return (self.left, self.right)
        return (self.left, self.mid, self.right)

    def children2(self) -> tuple | None:
        """Children in the binary view."""
        if self.left is None:
            return None
        if self.mid is None:
            return self.left, self.right
        return self.left, Half(self)

    def __repr__(self) -> str:
        if self.height == 0:
            return f"TreeNode.leaf({self.item!r})"
        arity = 2 if self.mid is None else 3
        return f"TreeNode(h={self.height}, {arity}-node, {self.first!r}..{self.last!r})"


class Half:
    """The virtual binary node over the ``mid`` and ``right`` children of a 3-node."""

    __slots__ = ("node",)

    def __init__(self, node: TreeNode) -> None:
        self.node = node

    @property
    def height(self) -> int:
        return self.node.height

    @property
    def first(self) -> Any:
        return self.node.mid.first

    @property
    def last(self) -> Any:
        return self.node.right.last

    @property
    def marked(self) -> Any:
        return self.node.hmarked

    def children2(self) -> tuple:
        return self.node.mid, self.node.right

    def as_tree(self) -> TreeNode:
        """A new 2-node holding the two children."""
        return TreeNode(self.node.mid, None, self.node.right)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Half) and other.node is self.node

    def __hash__(self) -> int:
        return hash((Half, id(self.node)))

    def __repr__(self) -> str:
        return f"Half({self.node!r})"


def as_tree(piece: TreeNode | Half) -> TreeNode:
    return piece.as_tree() if isinstance(piece, Half) else piece


class ItemHandle:
    """Constant-time reference to the leaf holding an item."""

    __slots__ = ("node",)

    def __init__(self, node: TreeNode) -> None:
        self.node = node

    @property
    def item(self) -> Any:
        return self.node.item

    @property
    def payload(self) -> Any:
        return self.node.payload

    @payload.setter
    def payload(self, value: Any) -> None:
        self.node.payload = value

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ItemHandle) and other.node is self.node

    def __hash__(self) -> int:
        return id(self.node)

    def __repr__(self) -> str:
        return f"ItemHandle({self.node.item!r})"


# ---------------------------------------------------------------------------
# traversal
# ---------------------------------------------------------------------------


def leaves(root: TreeNode | None) -> Iterator[TreeNode]:
    if root is None:
        return
    stack = [root]
    while stack:
        v = stack.pop()
        if v.left is None:
            yield v
        else:
            stack.extend(reversed(v.children()))


def items(root: TreeNode | None) -> list:
    return [v.item for v in leaves(root)]


def count_nodes(root: TreeNode | None) -> int:
    if root is None:
        return 0
    n = 0
    stack = [root]
    while stack:
        v = stack.pop()
        n += 1
        stack.extend(v.children())
    return n


def iter_nodes(root: TreeNode | None) -> Iterator[TreeNode]:
    if root is None:
        return
    stack = [root]
    while stack:
        v = stack.pop()
        yield v
        stack.extend(v.children())


# ---------------------------------------------------------------------------
# spine structure
# ---------------------------------------------------------------------------


def lspine_of(v: TreeNode) -> int:
    """Left spine structure from the stored spine of ``v.left``."""
    if v.height == 0:
        return 0
    return v.left.spine + (0 if v.mid is None else v.left.weight)


def rspine_of(v: TreeNode) -> int:
    """Right spine structure from the stored spine of ``v.right``."""
    if v.height == 0:
        return 0
    return v.right.spine + (0 if v.mid is None else v.right.weight)


def lspine(v: TreeNode) -> int:
    """Left spine structure recomputed from the shape alone."""
    s = 0
    while v.height > 0:
        if v.mid is not None:
            s += v.left.weight
        v = v.left
    return s


def rspine(v: TreeNode) -> int:
    """Right spine structure recomputed from the shape alone."""
    s = 0
    while v.height > 0:
        if v.mid is not None:
            s += v.right.weight
        v = v.right
    return s


def join_spines(xw: int, lx: int, rx: int, yw: int, ly: int, ry: int) -> tuple[bool, int, int]:
    """Whether joining X and Y overflows, and the join's left/right spine structures.

    Inputs are the weights (``2**height``) and spine structures of X and Y.
    Constant time; no tree is touched.
    """
    if xw == yw:
        return True, lx, ry
    if xw > yw:
        overflow = rx + yw >= xw
        rj = (rx - rx % yw + yw + ry) % xw
        half = xw >> 1
        lj = lx % half + (rj - rj % half if not overflow else 0)
        return overflow, lj, rj
    overflow = ly + xw >= yw
    lj = (ly - ly % xw + xw + lx) % yw
    half = yw >> 1
    rj = ry % half + (lj - lj % half if not overflow else 0)
    return overflow, lj, rj


# ---------------------------------------------------------------------------
# sequential functional join / split
# ---------------------------------------------------------------------------


def _node_of(kids: list) -> TreeNode:
    if len(kids) == 2:
        return TreeNode(kids[0], None, kids[1])
    return TreeNode(kids[0], kids[1], kids[2])


def _group(kids: list) -> list:
    if len(kids) <= 3:
        return [_node_of(kids)]
    return [_node_of(kids[:2]), _node_of(kids[2:])]


def _join_right(v: TreeNode, r: TreeNode) -> list:
    kids = list(v.children())
    if v.height == r.height + 1:
        kids.append(r)
    else:
        kids[-1:] = _join_right(kids[-1], r)
    return _group(kids)


def _join_left(l: TreeNode, v: TreeNode) -> list:
    kids = list(v.children())
    if v.height == l.height + 1:
        kids.insert(0, l)
    else:
        kids[:1] = _join_left(l, kids[0])
    return _group(kids)


def join(left: TreeNode | None, right: TreeNode | None) -> TreeNode | None:
    """Standard 2-3 join: all leaves of ``left`` then all of ``right``.

    Copies only the nodes on the path from the taller root to the splice
    point; O(|height difference| + 1) time.
    """
    if left is None:
        return right
    if right is None:
        return left
    if left.height == right.height:
        return TreeNode(left, None, right)
    if left.height > right.height:
        out = _join_right(left, right)
    else:
        out = _join_left(left, right)
    return out[0] if len(out) == 1 else TreeNode(out[0], None, out[1])


def join_cost(left: TreeNode | None, right: TreeNode | None) -> int:
    if left is None or right is None:
        return 1
    return abs(left.height - right.height) + 1


def _join_run(kids: tuple) -> TreeNode | None:
    if not kids:
        return None
    if len(kids) == 1:
        return kids[0]
    return _node_of(list(kids))


def split(v: TreeNode | None, key: Any) -> tuple[TreeNode | None, TreeNode | None, TreeNode | None]:
    """Split into (items < key, leaf equal to key or None, items > key)."""
    if v is None:
        return None, None, None
    if v.height == 0:
        if v.item < key:
            return v, None, None
        if key < v.item:
            return None, None, v
        return None, v, None
    kids = v.children()
    i = 0
    while i < len(kids) - 1 and kids[i].last < key:
        i += 1
    lt, eq, gt = split(kids[i], key)
    return join(_join_run(kids[:i]), lt), eq, join(gt, _join_run(kids[i + 1:]))


def find(v: TreeNode | None, key: Any) -> TreeNode | None:
    """The leaf holding ``key``, if any."""
    if v is None:
        return None
    while v.height > 0:
        if v.left.last >= key:
            v = v.left
        elif v.mid is not None and v.mid.last >= key:
            v = v.mid
        else:
            v = v.right
    return v if v.item == key else None


def build_from_leaves(leaf_nodes: list) -> TreeNode | None:
    """A 2-3 tree over ``leaf_nodes`` in order, grouping in 2s and 3s per level."""
    level = list(leaf_nodes)
    if not level:
        return None
    while len(level) > 1:
        nxt = []
        n = len(level)
        i = 0
        while i < n:
            rest = n - i
            if rest == 4:
                nxt.append(_node_of(level[i:i + 2]))
                nxt.append(_node_of(level[i + 2:i + 4]))
                i += 4
            elif rest == 3 or rest == 2:
                nxt.append(_node_of(level[i:]))
                i = n
            else:
                nxt.append(_node_of(level[i:i + 3]))
                i += 3
        level = nxt
    return level[0]


def slice_join_23(pieces: list) -> TreeNode | None:
    """Join an ordered slice of 2-3 subtrees (or binary-view pieces) into one 2-3 tree.

    Rising prefix folded left to right, falling suffix right to left, so
    every intermediate join is between trees of nearly equal height.
    """
    trees = [as_tree(p) for p in pieces]
    if not trees:
        return None
    peak = max(range(len(trees)), key=lambda i: trees[i].height)
    left = None
    for t in trees[: peak + 1]:
        left = join(left, t)
    right = None
    for t in reversed(trees[peak + 1:]):
        right = join(t, right)
    return join(left, right)


def slice_of_23(root: TreeNode, lo: int, hi: int) -> list:
    """Maximal subtrees of ``root`` covering leaf ranks ``lo..hi`` inclusive, in order."""
    sizes: dict = {}

    def size(v: TreeNode) -> int:
        s = sizes.get(id(v))
        if s is None:
            s = 1 if v.height == 0 else sum(size(c) for c in v.children())
            sizes[id(v)] = s
        return s

    if not 0 <= lo <= hi < size(root):
        raise IndexError(f"leaf range [{lo}, {hi}] outside tree")
    out: list = []

    def walk(v: TreeNode, start: int) -> None:
        end = start + size(v) - 1
        if end < lo or start > hi:
            return
        if lo <= start and end <= hi:
            out.append(v)
            return
        for c in v.children():
            walk(c, start)
            start += size(c)

    walk(root, 0)
    return out


def copy_spines(x: TreeNode | None) -> TreeNode | None:
    """Copy of ``x`` with fresh root and fresh non-leaf left/right spine nodes."""
    if x is None or x.height == 0:
        return x
    root = _clone(x)
    p = root
    while p.left.height > 0:
        c = _clone(p.left)
        p.left = c
        p = c
    p = root
    while p.right.height > 0:
        c = _clone(p.right)
        p.right = c
        p = c
    return root


def _clone(v: TreeNode) -> TreeNode:
    c = TreeNode(v.left, v.mid, v.right)
    c.spine = v.spine
    return c


def fix_spines(root: TreeNode | None) -> None:
    """Store the exact spine structure in every left/right child (sequential)."""
    if root is None:
        return
    stack = [root]
    while stack:
        v = stack.pop()
        if v.height == 0:
            continue
        v.left.spine = lspine(v.left)
        v.right.spine = rspine(v.right)
        stack.extend(v.children())
