"""Persistent-style 2-3 trees with batched, pipelined operations."""

from __future__ import annotations

from .access import (
    DELETE, INSERT, SEARCH, UPDATE, Access, Op, Probe, coalesce, effective_kind, sort_ops,
)
from .nodes import Half, ItemHandle, TreeNode, join_spines, lspine, rspine
from .tree import (
    PTree, apply_ops, batch_join_instances, execute, reverse_index, tree_violations, usearch,
)

__all__ = [
    "SEARCH", "UPDATE", "INSERT", "DELETE", "Access", "Op", "Probe", "coalesce",
    "effective_kind", "sort_ops", "Half", "ItemHandle", "TreeNode", "join_spines", "lspine",
    "rspine", "PTree", "apply_ops", "batch_join_instances", "execute", "reverse_index",
    "tree_violations", "usearch",
]
