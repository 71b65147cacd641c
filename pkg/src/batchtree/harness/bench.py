"""Cost measurement: one recorded run per (operation, n, b) cell.

Every measurement builds its inputs from a seeded generator, so a row is
a pure function of ``(op, n, b, rep, seed)`` on the recorded backend.
The ``wall`` column is only filled on the real (threaded) backend.
"""

from __future__ import annotations

import csv
import io
import json
import math
import random
import statistics
import time
from dataclasses import asdict, dataclass
from typing import Callable, Iterable

from ..batch import Batch, batch_from_sorted, batch_of
from ..batch_ops import filter as filter_batch, merge, partition
from ..ptree.access import INSERT, Op
from ..ptree.tree import PTree, apply_ops, reverse_index, usearch
from ..runtime import ExecutionRecord, run_recorded, run_threaded
from ..sorted_set import SetHandle, difference, intersection, union

COLUMNS = ("n", "b", "work", "span", "feeds", "contention", "wall",
           "op", "rep", "joinin_runs", "tree_steps", "marked")

OPS = ("execute", "usearch", "filter", "merge", "partition", "reverse", "union",
       "intersection", "difference")


@dataclass
class CostReport:
    op: str
    n: int
    b: int
    rep: int = 0
    work: int = 0
    span: int = 0
    feeds: int = 0
    joinin_runs: int = 0
    tree_steps: int = 0
    contention: int = 0
    marked: int = 0
    probe_violations: int = 0
    wall: float | None = None
    contention_by_kind: dict | None = None

    def row(self) -> list:
        wall = "" if self.wall is None else f"{self.wall:.6f}"
        return [self.n, self.b, self.work, self.span, self.feeds, self.contention, wall,
                self.op, self.rep, self.joinin_runs, self.tree_steps, self.marked]

    @property
    def access_counter(self) -> int:
        """Pieces moved, joinin runs and sequential tree steps: the sorted-access work counter."""
        return self.feeds + self.joinin_runs + self.tree_steps

    def as_dict(self) -> dict:
        return asdict(self)


def _from_record(op: str, n: int, b: int, rep: int, rec: ExecutionRecord) -> CostReport:
    c = rec.counters
    return CostReport(
        op=op, n=n, b=b, rep=rep, work=rec.work, span=rec.span,
        feeds=c["feeds"] + c["joinin_feeds"], joinin_runs=c["joinin_runs"],
        tree_steps=c["tree_steps"],
        contention=rec.max_contention, marked=c["marked"],
        probe_violations=c["probe_violations"],
        contention_by_kind=dict(rec.contention),
    )


# ---------------------------------------------------------------------------
# inputs
# ---------------------------------------------------------------------------


def _tree(n: int, parents: bool = False) -> PTree:
    """Tree over the even keys ``0, 2, ..., 2n-2``."""
    return PTree.from_sorted(range(0, 2 * n, 2), parents=parents)


def _program(op: str, n: int, b: int, rng: random.Random) -> Callable:
    """Build inputs for one cell and return a zero-argument task factory."""
    if op == "execute":
        t = _tree(n)
        keys = rng.sample(range(1, 2 * n, 2), b)
        ops = [Op(INSERT, k, k) for k in keys]
        return lambda: apply_ops(t, ops)
    if op == "usearch":
        t = _tree(n)
        keys = batch_of(rng.randrange(2 * n) for _ in range(b))
        return lambda: usearch(t, keys)
    if op == "filter":
        data = batch_from_sorted(range(n))
        return lambda: filter_batch(data, lambda x: x % 2 == 0)
    if op == "merge":
        a = batch_from_sorted(range(0, 2 * n, 2))
        other = batch_from_sorted(sorted(rng.sample(range(1, 2 * n, 2), b)))
        return lambda: merge(a, other)
    if op == "partition":
        data = batch_from_sorted(range(n))
        pivots = batch_from_sorted(sorted(rng.sample(range(n), b)))
        return lambda: partition(data, pivots)
    if op == "reverse":
        t = _tree(n, parents=True)
        keys = rng.sample(range(0, 2 * n, 2), b)
        handles = batch_of(t.handle(k) for k in keys)
        return lambda: reverse_index(t, handles)
    if op == "union":
        big = SetHandle(_tree(n))
        small = SetHandle.of(rng.sample(range(2 * n), b))
        return lambda: union(big, small)
    if op == "intersection":
        big = SetHandle(_tree(n))
        small = SetHandle.of(rng.sample(range(2 * n), b))
        return lambda: intersection(small, big)
    if op == "difference":
        # small minus big takes the longer route through an intersection
        big = SetHandle(_tree(n))
        small = SetHandle.of(rng.sample(range(2 * n), b))
        return lambda: difference(small, big)
    raise ValueError(f"unknown bench op {op!r}")


def measure(op: str, n: int, b: int, *, rep: int = 0, seed: int = 0,
            backend: str = "recorded", processors: int | None = None) -> CostReport:
    """Run one cell and report its costs."""
    rng = random.Random(f"{op}:{n}:{b}:{rep}:{seed}")
    if b == 0:
        return CostReport(op=op, n=n, b=0, rep=rep, wall=None if backend == "recorded" else 0.0)
    factory = _program(op, n, b, rng)
    if backend == "recorded":
        _, rec = run_recorded(factory(), seed=seed, processors=processors)
        return _from_record(op, n, b, rep, rec)
    start = time.perf_counter()
    run_threaded(factory())
    return CostReport(op=op, n=n, b=b, rep=rep, wall=time.perf_counter() - start)


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


def batch_sizes(n: int, spec: str = "1,sqrt,n/4,n") -> list[int]:
    """Resolve a batch-size list such as ``"1,sqrt,n/4,n,32"`` for one ``n``."""
    out = []
    for part in spec.split(","):
        part = part.strip()
        if part == "sqrt":
            b = math.isqrt(n)
        elif part == "n":
            b = n
        elif part.startswith("n/"):
            b = n // int(part[2:])
        else:
            b = int(part)
        if b > n:
            raise ValueError(f"batch size {b} exceeds n={n}")
        if b not in out:
            out.append(b)
    return out


def grid(ns: Iterable[int], bspec: str = "1,sqrt,n/4,n") -> list[tuple[int, int]]:
    return [(n, b) for n in ns for b in batch_sizes(n, bspec)]


def run_grid(op: str, cells: Iterable[tuple[int, int]], *, reps: int = 1, seed: int = 0,
             backend: str = "recorded", processors: int | None = None) -> list[CostReport]:
    return [measure(op, n, b, rep=r, seed=seed, backend=backend, processors=processors)
            for n, b in cells for r in range(reps)]


def write_csv(reports: Iterable[CostReport], out: io.TextIOBase) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in reports:
        w.writerow(r.row())


def write_json(reports: Iterable[CostReport], out: io.TextIOBase) -> None:
    rows = [dict(zip(COLUMNS, r.row())) for r in reports]
    json.dump(rows, out, indent=1)
    out.write("\n")


# ---------------------------------------------------------------------------
# bound formulas and fits
# ---------------------------------------------------------------------------


def log2p(x: float) -> float:
    return math.log2(x + 1)


def access_work_bound(n: int, b: int) -> float:
    """``b*log2(n/b + 1) + b``: work shape of sorted access and partitioning."""
    return b * log2p(n / b) + b if b else 0.0


def execute_span_bound(n: int, b: int) -> float:
    return math.log2(b) + math.log2(n) if b else 0.0


def usearch_span_bound(n: int, b: int) -> float:
    # +1 keeps b = 1 from zeroing the product
    return (math.log2(b) + 1) * math.log2(n) if b else 0.0


def reverse_marked_bound(n: int, b: int) -> float:
    return 4 * (b + 1) * math.log2(n / b) + 2 * b


def loglog_slope(xs: list[float], ys: list[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    lx = [math.log(x) for x in xs]
    ly = [math.log(y) for y in ys]
    return statistics.linear_regression(lx, ly).slope


def max_ratio(values: list[float], bounds: list[float]) -> float:
    return max(v / f for v, f in zip(values, bounds) if f > 0)


def affine_residuals(xs: list[float], ys: list[float]) -> list[float]:
    """Relative residuals of the least-squares line ``y = a + b*x``."""
    fit = statistics.linear_regression(xs, ys)
    return [(y - (fit.intercept + fit.slope * x)) / y for x, y in zip(xs, ys)]
