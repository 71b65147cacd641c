"""Scenarios: seeded descriptions of a tree plus batches of accesses.

A :class:`Scenario` fully determines a recorded run.  :func:`check` runs
it under each scheduler seed, validates the tree after every batch and
compares everything against the sequential oracle.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from ..batch import batch_of
from ..ptree.access import KINDS, Op
from ..ptree.tree import PTree, apply_ops, usearch
from ..runtime import run_recorded, run_threaded
from .oracle import oracle_set

BACKENDS = ("recorded", "real")
CORRUPTIONS = ("swap", "stale")
MAX_PROBES = 32


class ScenarioError(ValueError):
    """A scenario file or flag set that cannot be run."""


@dataclass
class Scenario:
    seed: int = 0
    n: int = 64
    b: int = 32
    mix: dict = field(default_factory=lambda: {"insert": 0.4, "delete": 0.3, "search": 0.3})
    backend: str = "recorded"
    seeds: list = field(default_factory=lambda: [0])
    processors: int | None = None
    batches: int = 1
    key_space: int | None = None
    corrupt: str | None = None

    def __post_init__(self) -> None:
        if self.n < 0 or self.b < 0 or self.batches < 0:
            raise ScenarioError("n, b and batches must be nonnegative")
        if self.backend not in BACKENDS:
            raise ScenarioError(f"backend must be one of {BACKENDS}, not {self.backend!r}")
        bad = set(self.mix) - set(KINDS)
        if bad or not self.mix or any(w < 0 for w in self.mix.values()) \
                or sum(self.mix.values()) <= 0:
            raise ScenarioError(f"bad op mix {self.mix!r}")
        if not self.seeds:
            raise ScenarioError("need at least one scheduler seed")
        if self.processors is not None and self.processors < 1:
            raise ScenarioError("processors must be positive")
        if self.corrupt is not None and self.corrupt not in CORRUPTIONS:
            raise ScenarioError(f"corrupt must be one of {CORRUPTIONS}")
        if self.key_space is None:
            self.key_space = 2 * (self.n + self.b) + 2
        if self.key_space < self.n:
            raise ScenarioError("key_space smaller than n")

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ScenarioError(f"unknown scenario fields: {sorted(extra)}")
        try:
            return cls(**d)
        except TypeError as e:
            raise ScenarioError(str(e)) from None

    @classmethod
    def load(cls, path: str | Path) -> "Scenario":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ScenarioError(f"cannot read scenario {path}: {e}") from None
        if not isinstance(d, dict):
            raise ScenarioError("scenario file must hold a JSON object")
        return cls.from_dict(d)

    def to_dict(self) -> dict:
        return asdict(self)

    # -- generated inputs ---------------------------------------------------

    def initial(self) -> list[tuple]:
        rng = random.Random(f"initial:{self.seed}")
        keys = sorted(rng.sample(range(self.key_space), self.n))
        return [(k, rng.randrange(10**6)) for k in keys]

    def op_batches(self) -> list[list[tuple]]:
        rng = random.Random(f"ops:{self.seed}")
        kinds = list(self.mix)
        weights = [self.mix[k] for k in kinds]
        out = []
        for _ in range(self.batches):
            out.append([(rng.choices(kinds, weights)[0], rng.randrange(self.key_space),
                         rng.randrange(10**6)) for _ in range(self.b)])
        return out

    def probe_keys(self) -> list:
        rng = random.Random(f"probe:{self.seed}")
        return [rng.randrange(self.key_space) for _ in range(min(max(1, self.b), MAX_PROBES))]


@dataclass
class Outcome:
    """Everything observable about one run, for oracle and cross-seed comparison."""

    csv: str
    shape: str
    results: list
    handles_ok: bool
    probes: list
    violations: list
    records: list

    def fingerprint(self) -> tuple:
        return self.csv, self.shape, tuple(self.results), tuple(self.probes)


def corrupt_tree(t: PTree, how: str) -> None:
    """Deliberately break ``t`` (negative control for the validator)."""
    if t.root is None or t.root.height == 0:
        raise ScenarioError("cannot corrupt a tree with fewer than two items")
    if how == "swap":
        v = t.root
        while v.left.height > 0:
            v = v.left
        a, b = v.left, v.children()[1]
        a.item, b.item = b.item, a.item
        a.first = a.last = a.item
        b.first = b.last = b.item
    elif how == "stale":
        t.root.last = None


def _run(task: Any, backend: str, seed: int, processors: int | None) -> tuple:
    if backend == "recorded":
        return run_recorded(task, seed=seed, processors=processors)
    return run_threaded(task), None


def run_scenario(sc: Scenario, sched_seed: int) -> Outcome:
    init = sc.initial()
    tree = PTree.from_sorted([k for k, _ in init], [p for _, p in init], parents=True)
    violations: list[str] = []
    if sc.corrupt:
        corrupt_tree(tree, sc.corrupt)
    violations += [f"initial: {m}" for m in tree.validate()]
    if violations:
        # operating on a broken tree proves nothing and may not terminate cleanly
        return Outcome(tree.to_csv(), tree.dump(), [], True, [], violations, [])
    results: list = []
    handles_ok = True
    records = []
    for i, batch in enumerate(sc.op_batches()):
        ops = [Op(kind, key, payload) for kind, key, payload in batch]
        _, rec = _run(apply_ops(tree, ops), sc.backend, sched_seed + i, sc.processors)
        records.append(rec)
        violations += [f"after batch {i}: {m}" for m in tree.validate()]
        for op in ops:
            results.append(op.result())
            present_after = op.kind == "insert" or (op.kind != "delete" and op.found)
            if present_after != (op.handle is not None):
                handles_ok = False
            elif op.handle is not None and op.handle.item != op.key:
                handles_ok = False
    probes, _ = _run(usearch(tree, batch_of(sc.probe_keys())), sc.backend, sched_seed,
                     sc.processors)
    return Outcome(tree.to_csv(), tree.dump(), results, handles_ok, [p.found for p in probes],
                   violations, records)


@dataclass
class Report:
    ok: bool
    lines: list

    def text(self) -> str:
        return "\n".join(self.lines)


def check(sc: Scenario) -> Report:
    """Oracle equivalence, validation and cross-seed identity for one scenario."""
    lines: list[str] = []
    ok = True
    init = sc.initial()
    flat = [op for batch in sc.op_batches() for op in batch]
    want = oracle_set(flat, init)
    want_csv = PTree.from_sorted(want.items, want.payloads, parents=False).to_csv()
    present = set(want.items)
    want_probes = [k in present for k in sc.probe_keys()]
    first = None
    for s in sc.seeds:
        out = run_scenario(sc, s)
        tag = f"seed {s}"
        if out.violations:
            ok = False
            lines += [f"{tag}: violation: {m}" for m in out.violations[:10]]
        if out.csv != want_csv:
            ok = False
            lines.append(f"{tag}: final items differ from oracle")
        if out.results != want.results:
            bad = next(i for i, (a, b) in enumerate(zip(out.results, want.results)) if a != b) \
                if len(out.results) == len(want.results) else -1
            ok = False
            lines.append(f"{tag}: result slot {bad} differs from oracle")
        if not out.handles_ok:
            ok = False
            lines.append(f"{tag}: a returned handle is missing or points at the wrong item")
        if out.probes != want_probes:
            ok = False
            lines.append(f"{tag}: unsorted search disagrees with oracle")
        if first is None:
            first = out.fingerprint()
        elif out.fingerprint() != first:
            ok = False
            lines.append(f"{tag}: outcome differs from seed {sc.seeds[0]}")
    status = "ok" if ok else "FAIL"
    lines.insert(0, f"{status} scenario seed={sc.seed} n={sc.n} b={sc.b} batches={sc.batches} "
                    f"sched_seeds={len(sc.seeds)} backend={sc.backend}")
    if ok and len(sc.seeds) > 1:
        lines.append(f"identical results across {len(sc.seeds)} scheduler seeds")
    return Report(ok, lines)


def default_suite() -> list[Scenario]:
    """Small fixed scenarios covering every op kind, empty trees and repeated keys."""
    mixes = [
        {"insert": 1.0},
        {"delete": 1.0},
        {"search": 1.0},
        {"insert": 0.4, "delete": 0.3, "search": 0.2, "update": 0.1},
    ]
    out = []
    for i, mix in enumerate(mixes):
        out.append(Scenario(seed=i, n=0, b=8, mix=mix, seeds=[0, 1]))
        out.append(Scenario(seed=i, n=1, b=3, mix=mix, seeds=[0, 1]))
        out.append(Scenario(seed=i, n=40, b=16, mix=mix, seeds=[0, 1, 2], batches=3))
        out.append(Scenario(seed=i, n=300, b=300, mix=mix, seeds=[0, 1], batches=2,
                            key_space=400))
        out.append(Scenario(seed=i, n=500, b=7, mix=mix, seeds=[0, 1], key_space=50_000))
    return out


def _log_uniform(rng: random.Random, hi: int) -> int:
    """Integer in ``[0, hi]`` whose ``log2(x + 1)`` is uniform."""
    return min(hi, int(2 ** rng.uniform(0, math.log2(hi + 1))) - 1)


def random_scenario(seed: int, max_n: int, max_b: int | None = None,
                    seeds: list | None = None, backend: str = "recorded") -> Scenario:
    """Sizes are log-uniform, so small trees and batches are as common as large ones."""
    rng = random.Random(f"fuzz:{seed}")
    n = _log_uniform(rng, max_n)
    b_cap = max(1, n if max_b is None else min(max_b, max(1, n)))
    b = 1 + _log_uniform(rng, b_cap - 1)
    raw = {k: rng.random() for k in KINDS if rng.random() < 0.8}
    mix = raw or {"insert": 1.0}
    return Scenario(seed=seed, n=n, b=b, mix=mix, seeds=seeds or [seed], backend=backend,
                    key_space=rng.choice([2 * (n + b) + 2, n + 2, 4 * n + 8]))
