"""Frozen cost-bound constants.

Each calibrated constant is 1.25 times the largest ratio of a measured
counter to its bound formula over the calibration grid (recorded backend,
scheduler seed 0), taken once and then committed.  ``bench --calibrate``
recomputes the suggestions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from . import bench

CALIBRATION_NS = (2**8, 2**10, 2**12, 2**14, 2**16)
CALIBRATION_BS = "1,sqrt,n/4,n"
CALIBRATION_MARGIN = 1.25

# per-cell request-queue limits by cell kind, fixed by design
CONTENTION_LIMITS = {"queue": 2, "marked": 2, "barrier": 2, "reactivation": 3}

# calibrated values (see module docstring)
C_EXECUTE_COUNTER = 7.85
C_EXECUTE_FEEDS = 2.516
C_EXECUTE_SPAN = 34.583
C_USEARCH_SPAN = 42.0
C_FILTER_FEEDS = 1.875
C_MERGE_FEEDS = 14.994
C_PARTITION_FEEDS = 2.258
C_UNION_WORK = 72.882
C_INTERSECTION_WORK = 115.699
C_DIFFERENCE_WORK = 115.835


@dataclass(frozen=True)
class Bound:
    op: str
    value: Callable[[bench.CostReport], float]
    formula: Callable[[int, int], float]
    constant: float

    def limit(self, n: int, b: int) -> float:
        return self.constant * self.formula(n, b)


def _n_only(n: int, b: int) -> float:
    return float(n)


BOUNDS = {
    "execute_counter": Bound("execute", lambda r: r.access_counter, bench.access_work_bound,
                             C_EXECUTE_COUNTER),
    "execute_feeds": Bound("execute", lambda r: r.feeds + r.joinin_runs, bench.access_work_bound,
                           C_EXECUTE_FEEDS),
    "execute_span": Bound("execute", lambda r: r.span, bench.execute_span_bound, C_EXECUTE_SPAN),
    "usearch_span": Bound("usearch", lambda r: r.span, bench.usearch_span_bound, C_USEARCH_SPAN),
    "filter_feeds": Bound("filter", lambda r: r.feeds, _n_only, C_FILTER_FEEDS),
    "merge_feeds": Bound("merge", lambda r: r.feeds, _n_only, C_MERGE_FEEDS),
    "partition_feeds": Bound("partition", lambda r: r.feeds, bench.access_work_bound,
                             C_PARTITION_FEEDS),
    "union_work": Bound("union", lambda r: r.work, bench.access_work_bound, C_UNION_WORK),
    "intersection_work": Bound("intersection", lambda r: r.work, bench.access_work_bound,
                               C_INTERSECTION_WORK),
    "difference_work": Bound("difference", lambda r: r.work, bench.access_work_bound,
                             C_DIFFERENCE_WORK),
    # fixed by the subtree-size lemma (c = 4), not calibrated
    "reverse_marked": Bound("reverse", lambda r: r.marked, bench.reverse_marked_bound, 1.0),
}


def suggest(reports: list) -> dict:
    """Calibrated constant per bound for the given rows (1.25x the max ratio)."""
    out = {}
    for name, bound in BOUNDS.items():
        ratios = [bound.value(r) / bound.formula(r.n, r.b) for r in reports
                  if r.op == bound.op and r.b > 0 and bound.formula(r.n, r.b) > 0]
        if ratios:
            out[name] = round(CALIBRATION_MARGIN * max(ratios), 3)
    return out
