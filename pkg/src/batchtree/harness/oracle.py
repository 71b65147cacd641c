"""Sequential ordered-set oracle: a sorted list with binary search."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Any, Iterable


@dataclass
class OracleResult:
    items: list
    payloads: list
    results: list = field(default_factory=list)


def oracle_set(ops: Iterable[tuple], initial: Iterable[tuple] = ()) -> OracleResult:
    """Apply ``(kind, key, payload)`` ops in order to a sorted array.

    ``initial`` holds ``(key, payload)`` pairs.  Each op's result is
    ``(found, value)``: whether the key was present before the op, and its
    payload at that moment (``None`` if absent).
    """
    keys: list = []
    vals: list = []
    for k, p in sorted(initial, key=lambda kp: kp[0]):
        keys.append(k)
        vals.append(p)
    results = []
    for kind, key, payload in ops:
        i = bisect.bisect_left(keys, key)
        present = i < len(keys) and keys[i] == key
        value = vals[i] if present else None
        results.append((present, value))
        if kind == "insert":
            if not present:
                keys.insert(i, key)
                vals.insert(i, payload)
        elif kind == "delete":
            if present:
                del keys[i]
                del vals[i]
        elif kind == "update":
            if present:
                vals[i] = payload
        elif kind != "search":
            raise ValueError(f"unknown op kind {kind!r}")
    return OracleResult(keys, vals, results)


def oracle_search(items: Iterable[Any], keys: Iterable[Any]) -> list[bool]:
    present = set(items)
    return [k in present for k in keys]
