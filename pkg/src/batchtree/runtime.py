"""Fork-join task runtime with queued read-modify-write accounting.

Tasks are generators.  A task performs a primitive step by yielding a
request built with the helpers below (``tick``, ``read``, ``tas``,
``fork``, ``join``, ...) and receives the step's result as the value of
the ``yield`` expression.  Subroutines compose with ``yield from``.

Two drivers execute the same task code:

* :func:`run_recorded` simulates a greedy scheduler on one thread with
  seeded tie-breaking.  Every request to a :class:`Cell` is FIFO-queued
  and one request per cell is serviced per time step, so an RMW weighs
  its queue rank.  The driver accumulates work, span and per-cell
  contention into an :class:`ExecutionRecord`.
* :func:`run_threaded` runs every forked task on its own OS thread.
  It exists for wall-clock runs; all cost assertions use the recorded
  driver.

Synchronisation built on cells: :class:`NonBlockingLock`,
:class:`Barrier` and :class:`ReactivationWrapper`.
"""

from __future__ import annotations

import csv
import gc
import io
import random
import threading
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Any, Callable, Generator, Iterable

Task = Generator[Any, Any, Any]

# request opcodes
_TICK = 0
_RMW = 1
_FORK = 2
_JOIN = 3
_SUSPEND = 4
_RESUME = 5

# RMW operations
READ = 0
WRITE = 1
TAS = 2
FAA = 3
CAS = 4

DEFAULT_STEP_BUDGET = 10**9


class StepBudgetExceeded(RuntimeError):
    """Raised when a recorded run performs more work than its budget."""


class Deadlock(RuntimeError):
    """Raised when no task can make progress but the program has not ended."""


class Cell:
    """A shared memory cell.  All access goes through RMW requests."""

    __slots__ = ("value", "kind", "queue", "log")

    def __init__(self, value: Any = None, kind: str = "cell") -> None:
        self.value = value
        self.kind = kind
        self.queue: deque | None = None
        self.log: list | None = None

    def __repr__(self) -> str:
        return f"Cell({self.value!r}, kind={self.kind!r})"


def _apply(cell: Cell, op: int, a: Any, b: Any) -> Any:
    prior = cell.value
    if op == READ:
        pass
    elif op == WRITE:
        cell.value = a
    elif op == TAS:
        cell.value = True
        prior = bool(prior)
    elif op == FAA:
        cell.value = prior + a
    elif op == CAS:
        if prior == a:
            cell.value = b
    else:
        raise ValueError(f"unknown RMW op {op}")
    return prior


# ---------------------------------------------------------------------------
# request builders
# ---------------------------------------------------------------------------

TICK = (_TICK, 1)
SUSPEND = (_SUSPEND,)


def tick(k: int = 1) -> tuple:
    """A local computation step of weight ``k``."""
    return (_TICK, k)


def read(cell: Cell) -> tuple:
    return (_RMW, cell, READ, None, None)


def write(cell: Cell, value: Any) -> tuple:
    return (_RMW, cell, WRITE, value, None)


def tas(cell: Cell) -> tuple:
    return (_RMW, cell, TAS, None, None)


def faa(cell: Cell, k: int) -> tuple:
    return (_RMW, cell, FAA, k, None)


def cas(cell: Cell, expected: Any, new: Any) -> tuple:
    return (_RMW, cell, CAS, expected, new)


def rmw(cell: Cell, op: int, a: Any = None, b: Any = None) -> tuple:
    return (_RMW, cell, op, a, b)


def fork(body: Task) -> tuple:
    """Spawn ``body`` as a new task; the yield evaluates to its handle."""
    return (_FORK, body)


def join(handle: "TaskHandle") -> tuple:
    """Wait for a forked task; the yield evaluates to its return value."""
    return (_JOIN, handle)


def resume(handle: "TaskHandle") -> tuple:
    return (_RESUME, handle)


def par(*bodies: Task) -> Task:
    """Run ``bodies`` in parallel and return their results as a list."""
    if not bodies:
        return []
    handles = []
    for body in bodies[1:]:
        handles.append((yield (_FORK, body)))
    results = [(yield from bodies[0])]
    for h in handles:
        results.append((yield (_JOIN, h)))
    return results


def par2(a: Task, b: Task) -> Task:
    h = yield (_FORK, b)
    ra = yield from a
    rb = yield (_JOIN, h)
    return ra, rb


# ---------------------------------------------------------------------------
# driver-agnostic hooks
# ---------------------------------------------------------------------------

_driver: Any = None
_NO_STAMP = (0, None)


def current_task() -> "TaskHandle":
    return _driver.current_task()


def stamp() -> tuple:
    """Position of the calling task in the execution DAG."""
    d = _driver
    if d is None:
        return _NO_STAMP
    return d.stamp()


def depend(s: tuple) -> None:
    """Make the calling task's next step depend on stamp ``s``."""
    d = _driver
    if d is not None and s is not _NO_STAMP:
        d.depend(s)


def count(name: str, k: int = 1) -> None:
    """Bump a named cost counter of the running program."""
    d = _driver
    if d is not None:
        d.count(name, k)


def counters() -> Counter:
    return _driver.counters if _driver is not None else Counter()


# ---------------------------------------------------------------------------
# recorded driver
# ---------------------------------------------------------------------------


class TaskHandle:
    __slots__ = (
        "gen", "depth", "val", "done", "result", "joiners", "joined",
        "suspended", "permit", "permit_stamp", "tid", "last", "extra",
    )

    def __init__(self, gen: Task, depth: int, tid: int) -> None:
        self.gen = gen
        self.depth = depth
        self.val = None
        self.done = False
        self.result = None
        self.joiners: list = []
        self.joined = False
        self.suspended = False
        self.permit = False
        self.permit_stamp = _NO_STAMP
        self.tid = tid
        self.last: int | None = None
        self.extra: list | None = None

    def __repr__(self) -> str:
        return f"<task {self.tid}{' done' if self.done else ''}>"


@dataclass
class ExecutionRecord:
    """Costs of one recorded run.

    ``work`` is the total weight of executed steps and ``span`` the weight
    of the heaviest dependency path.  ``nodes`` and ``cell_traces`` are only
    filled when the run was traced.
    """

    work: int = 0
    span: int = 0
    time: int = 0
    steps: int = 0
    tasks: int = 0
    max_contention: int = 0
    contention: dict = field(default_factory=dict)
    counters: Counter = field(default_factory=Counter)
    nodes: list | None = None
    cell_traces: dict | None = None

    def to_csv(self, out: io.TextIOBase | None = None) -> str:
        """Dump traced DAG nodes as ``node,weight,parents`` rows."""
        if self.nodes is None:
            raise ValueError("run was not traced")
        buf = out if out is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["node", "weight", "parents"])
        for nid, weight, parents in self.nodes:
            w.writerow([nid, weight, " ".join(map(str, parents))])
        return buf.getvalue() if out is None else ""


class _Recorded:
    def __init__(self, seed: int, processors: int | None, budget: int, trace: bool) -> None:
        self.rng = random.Random(seed)
        self.procs = processors
        self.budget = budget
        self.trace = trace
        self.counters: Counter = Counter()
        self.cur: TaskHandle | None = None
        self.ntasks = 0
        self.nodes: list | None = [] if trace else None
        self.cells: dict | None = {} if trace else None

    # hooks -----------------------------------------------------------------
    def current_task(self) -> TaskHandle:
        return self.cur

    def stamp(self) -> tuple:
        t = self.cur
        return (t.depth, t.last)

    def depend(self, s: tuple) -> None:
        t = self.cur
        if s[0] > t.depth:
            t.depth = s[0]
        if self.trace and s[1] is not None:
            if t.extra is None:
                t.extra = []
            t.extra.append(s[1])

    def count(self, name: str, k: int) -> None:
        self.counters[name] += k

    # tracing ---------------------------------------------------------------
    def _node(self, task: TaskHandle, weight: int) -> None:
        parents = [] if task.last is None else [task.last]
        if task.extra:
            parents.extend(task.extra)
            task.extra = None
        nid = len(self.nodes)
        self.nodes.append((nid, weight, tuple(parents)))
        task.last = nid

    # main loop -------------------------------------------------------------
    def run(self, gen: Task) -> tuple[Any, ExecutionRecord]:
        rng = self.rng
        procs = self.procs
        trace = self.trace
        budget = self.budget
        root = TaskHandle(gen, 0, 0)
        self.ntasks = 1
        ready = [root]
        active: list[Cell] = []
        contention: dict = {}
        work = 0
        steps = 0
        span = 0
        t = 0
        while ready or active:
            t += 1
            if procs is not None and len(ready) > procs:
                rng.shuffle(ready)
                now = ready[:procs]
                nxt = ready[procs:]
            else:
                if len(ready) > 1:
                    rng.shuffle(ready)
                now = ready
                nxt = []
            for task in now:
                self.cur = task
                try:
                    req = task.gen.send(task.val)
                except StopIteration as stop:
                    task.done = True
                    task.result = stop.value
                    if task.depth > span:
                        span = task.depth
                    for j in task.joiners:
                        if task.depth > j.depth:
                            j.depth = task.depth
                        j.val = stop.value
                        if trace:
                            j.extra = (j.extra or []) + [task.last]
                        nxt.append(j)
                    task.joiners = []
                    continue
                task.val = None
                steps += 1
                op = req[0]
                if op == _TICK:
                    w = req[1]
                    work += w
                    task.depth += w
                    if trace:
                        self._node(task, w)
                    nxt.append(task)
                elif op == _RMW:
                    cell = req[1]
                    q = cell.queue
                    if q is None:
                        q = cell.queue = deque()
                        active.append(cell)
                    q.append((task, t, req[2], req[3], req[4]))
                    if len(q) > contention.get(cell.kind, 0):
                        contention[cell.kind] = len(q)
                elif op == _FORK:
                    work += 1
                    task.depth += 1
                    if trace:
                        self._node(task, 1)
                    child = TaskHandle(req[1], task.depth, self.ntasks)
                    self.ntasks += 1
                    if trace:
                        child.extra = [task.last]
                    task.val = child
                    nxt.append(task)
                    nxt.append(child)
                elif op == _JOIN:
                    child = req[1]
                    assert not child.joined, "task joined twice"
                    child.joined = True
                    work += 1
                    task.depth += 1
                    if trace:
                        self._node(task, 1)
                    if child.done:
                        if child.depth > task.depth:
                            task.depth = child.depth
                        if trace:
                            task.extra = [child.last]
                        task.val = child.result
                        nxt.append(task)
                    else:
                        child.joiners.append(task)
                elif op == _SUSPEND:
                    work += 1
                    task.depth += 1
                    if trace:
                        self._node(task, 1)
                    if task.permit:
                        task.permit = False
                        self.depend(task.permit_stamp)
                        nxt.append(task)
                    else:
                        task.suspended = True
                elif op == _RESUME:
                    work += 1
                    task.depth += 1
                    if trace:
                        self._node(task, 1)
                    target = req[1]
                    s = (task.depth, task.last)
                    if target.suspended:
                        target.suspended = False
                        self.cur = target
                        self.depend(s)
                        nxt.append(target)
                    else:
                        target.permit = True
                        target.permit_stamp = s
                    nxt.append(task)
                else:
                    raise ValueError(f"bad request {req!r}")
            # service one queued request per active cell
            if active:
                still = []
                for cell in active:
                    q = cell.queue
                    task, arrival, op, a, b = q.popleft()
                    prior = _apply(cell, op, a, b)
                    w = t - arrival + 1
                    work += w
                    task.depth += w
                    task.val = prior
                    if trace:
                        self._node(task, w)
                        self.cells.setdefault(id(cell), (cell, []))[1].append(
                            (arrival, t, task.tid, op, a, b, prior))
                    nxt.append(task)
                    if q:
                        still.append(cell)
                    else:
                        cell.queue = None
                active = still
            ready = nxt
            if work > budget:
                raise StepBudgetExceeded(f"work {work} exceeded budget {budget}")
        self.cur = None
        if not root.done:
            raise Deadlock("program blocked with no runnable task")
        rec = ExecutionRecord(
            work=work, span=span, time=t, steps=steps, tasks=self.ntasks,
            max_contention=max(contention.values(), default=0),
            contention=contention, counters=self.counters, nodes=self.nodes,
            cell_traces=None,
        )
        if trace:
            rec.cell_traces = {k: v for k, v in self.cells.items()}
        return root.result, rec


def _program(program: Task | Callable[[], Task]) -> Task:
    return program() if callable(program) else program


def run_recorded(
    program: Task | Callable[[], Task],
    seed: int = 0,
    processors: int | None = None,
    *,
    budget: int = DEFAULT_STEP_BUDGET,
    trace: bool = False,
) -> tuple[Any, ExecutionRecord]:
    """Execute ``program`` on the deterministic recorded driver.

    ``processors=None`` lets every ready task step at each time unit.
    The result is a pure function of ``(program, seed, processors)``.
    """
    global _driver
    prev = _driver
    drv = _Recorded(seed, processors, budget, trace)
    _driver = drv
    # a run allocates millions of short-lived objects; collect young ones
    # rarely and keep everything allocated before the run out of full passes
    thresholds = gc.get_threshold()
    gc.freeze()
    gc.set_threshold(200_000, 20, 100)
    try:
        return drv.run(_program(program))
    finally:
        _driver = prev
        gc.set_threshold(*thresholds)
        gc.unfreeze()


# ---------------------------------------------------------------------------
# threaded driver
# ---------------------------------------------------------------------------


class _ThreadTask:
    __slots__ = ("gen", "done", "result", "error", "sem", "joined")

    def __init__(self, gen: Task) -> None:
        self.gen = gen
        self.done = threading.Event()
        self.result = None
        self.error: BaseException | None = None
        self.sem = threading.Semaphore(0)
        self.joined = False


class _Threaded:
    def __init__(self) -> None:
        self.rmw_lock = threading.Lock()
        self.count_lock = threading.Lock()
        self.local = threading.local()
        self.counters: Counter = Counter()
        self.threads: list[threading.Thread] = []
        self.errors: list[BaseException] = []

    def current_task(self) -> _ThreadTask:
        return self.local.task

    def stamp(self) -> tuple:
        return _NO_STAMP

    def depend(self, s: tuple) -> None:
        pass

    def count(self, name: str, k: int) -> None:
        with self.count_lock:
            self.counters[name] += k

    def drive(self, task: _ThreadTask) -> None:
        self.local.task = task
        gen = task.gen
        val = None
        try:
            while True:
                try:
                    req = gen.send(val)
                except StopIteration as stop:
                    task.result = stop.value
                    return
                val = None
                op = req[0]
                if op == _TICK:
                    continue
                if op == _RMW:
                    with self.rmw_lock:
                        val = _apply(req[1], req[2], req[3], req[4])
                elif op == _FORK:
                    child = _ThreadTask(req[1])
                    th = threading.Thread(target=self.drive, args=(child,), daemon=True)
                    self.threads.append(th)
                    th.start()
                    val = child
                elif op == _JOIN:
                    child = req[1]
                    assert not child.joined, "task joined twice"
                    child.joined = True
                    child.done.wait()
                    if child.error is not None:
                        raise child.error
                    val = child.result
                elif op == _SUSPEND:
                    task.sem.acquire()
                elif op == _RESUME:
                    req[1].sem.release()
                else:
                    raise ValueError(f"bad request {req!r}")
        except BaseException as exc:  # noqa: BLE001 - surfaced by run_threaded
            task.error = exc
            self.errors.append(exc)
        finally:
            task.done.set()


def run_threaded(program: Task | Callable[[], Task]) -> Any:
    """Execute ``program`` with one OS thread per forked task."""
    global _driver
    prev = _driver
    drv = _Threaded()
    _driver = drv
    old = threading.stack_size()
    threading.stack_size(1 << 20)
    try:
        root = _ThreadTask(_program(program))
        drv.drive(root)
        # stragglers (e.g. trailing ineffective reactivation runs)
        for th in list(drv.threads):
            th.join()
        if drv.errors:
            raise drv.errors[0]
        return root.result
    finally:
        threading.stack_size(old)
        _driver = prev


def run(program: Task | Callable[[], Task], backend: str = "recorded", seed: int = 0,
        processors: int | None = None) -> Any:
    """Run ``program`` to completion and return its result."""
    if backend == "recorded":
        return run_recorded(program, seed, processors)[0]
    if backend in ("threaded", "real"):
        return run_threaded(program)
    raise ValueError(f"unknown backend {backend!r}")


# ---------------------------------------------------------------------------
# synchronisation primitives
# ---------------------------------------------------------------------------


class NonBlockingLock:
    __slots__ = ("cell", "probes")

    def __init__(self, kind: str = "lock") -> None:
        self.cell = Cell(False, kind)
        self.probes = 0


def try_lock(lock: NonBlockingLock) -> Task:
    lock.probes += 1
    prior = yield (_RMW, lock.cell, TAS, None, None)
    return not prior


def unlock(lock: NonBlockingLock) -> Task:
    assert lock.cell.value, "unlock of a lock that is not held"
    yield (_RMW, lock.cell, WRITE, False, None)


class Barrier:
    """One waiter, one notifier.  A notify before the wait is not lost."""

    __slots__ = ("cond", "passed", "waiter", "note", "nwait", "nnotify")

    def __init__(self) -> None:
        self.cond = Cell(False, "barrier")
        self.passed = Cell(False, "barrier")
        self.waiter = Cell(None, "barrier")
        self.note = _NO_STAMP
        self.nwait = 0
        self.nnotify = 0


def barrier_wait(b: Barrier) -> Task:
    b.nwait += 1
    assert b.nwait == 1, "barrier has a second waiter"
    yield (_RMW, b.waiter, WRITE, current_task(), None)
    if not (yield (_RMW, b.passed, TAS, None, None)):
        yield SUSPEND
    depend(b.note)


def barrier_notify(b: Barrier) -> Task:
    b.nnotify += 1
    assert b.nnotify == 1, "barrier has a second notifier"
    b.note = stamp()
    yield (_RMW, b.cond, WRITE, True, None)
    if (yield (_RMW, b.passed, TAS, None, None)):
        t = yield (_RMW, b.waiter, READ, None, None)
        yield (_RESUME, t)


def barrier_notified(b: Barrier) -> Task:
    return (yield (_RMW, b.cond, READ, None, None))


class ReactivationWrapper:
    """Guards an inputless task body so that its runs never overlap.

    ``body`` is a zero-argument callable returning a task.
    """

    __slots__ = ("body", "count", "note", "runs", "calls")

    def __init__(self, body: Callable[[], Task], kind: str = "reactivation") -> None:
        self.body = body
        self.count = Cell(0, kind)
        self.note = _NO_STAMP
        self.runs = 0
        self.calls = 0


def reactivate(w: ReactivationWrapper) -> Task:
    w.calls += 1
    s = stamp()
    if s[0] >= w.note[0]:
        w.note = s
    if (yield (_RMW, w.count, FAA, 1, None)) == 0:
        yield (_FORK, _reactivation_loop(w))


def _reactivation_loop(w: ReactivationWrapper) -> Task:
    while True:
        yield (_RMW, w.count, WRITE, 1, None)
        depend(w.note)
        w.runs += 1
        yield from w.body()
        if (yield (_RMW, w.count, FAA, -1, None)) <= 1:
            return


def replay_cell_log(entries: Iterable[tuple], initial: Any) -> bool:
    """Check that serviced RMWs, replayed in service order, reproduce every prior."""
    probe = Cell(initial)
    for _arr, _svc, _tid, op, a, b, prior in entries:
        if _apply(probe, op, a, b) != prior:
            return False
    return True
