from __future__ import annotations

import pytest
from hypothesis import given, settings, strategies as st

from batchtree.runtime import (
    CAS, FAA, TAS, TICK, Barrier, Cell, NonBlockingLock, ReactivationWrapper, StepBudgetExceeded,
    barrier_notified, barrier_notify, barrier_wait, count, faa, fork, join, par, par2, rmw, read,
    reactivate, replay_cell_log, run, run_recorded, tas, tick, try_lock, unlock, write,
)


def _noop():
    yield TICK


def test_fork_noop_then_join():
    def prog():
        h = yield fork(_noop())
        yield join(h)
        return "done"

    assert run_recorded(prog())[0] == "done"


def test_eight_incrementers():
    c = Cell(0)

    def inc():
        yield faa(c, 1)

    def prog():
        hs = []
        for _ in range(8):
            hs.append((yield fork(inc())))
        for h in hs:
            yield join(h)
        return (yield read(c))

    for seed in range(5):
        c.value = 0
        assert run_recorded(prog(), seed=seed)[0] == 8


def test_nested_fork():
    def inner():
        yield TICK
        return 7

    def outer():
        h = yield fork(inner())
        return (yield join(h)) + 1

    def prog():
        h = yield fork(outer())
        return (yield join(h))

    assert run_recorded(prog())[0] == 8


def test_rmw_basics():
    c = Cell(0)

    def prog():
        a = yield read(c)
        b = yield tas(c)
        d = yield tas(c)
        e = yield rmw(c, CAS, True, 5)
        f = yield read(c)
        return a, b, d, e, f

    assert run_recorded(prog())[0] == (0, 0, True, True, 5)


def test_concurrent_faa_priors():
    seen = set()
    for seed in range(20):
        c = Cell(0)

        def add():
            return (yield faa(c, 1))

        res, _ = run_recorded(par(add(), add()), seed=seed)
        assert sorted(res) == [0, 1] and c.value == 2
        seen.add(tuple(res))
    assert seen == {(0, 1), (1, 0)}


def test_rmw_weight_is_queue_rank():
    c = Cell(0)

    def add():
        yield faa(c, 1)

    _, rec = run_recorded(par(*(add() for _ in range(4))))
    # forks are staggered, so not all four requests arrive together
    assert 2 <= rec.contention["cell"] <= 4


def test_lock_examples():
    lock = NonBlockingLock()

    def prog():
        a = yield from try_lock(lock)
        b = yield from try_lock(lock)
        yield from unlock(lock)
        c = yield from try_lock(lock)
        return a, b, c

    assert run_recorded(prog())[0] == (True, False, True)


def test_lock_race_has_one_winner():
    for seed in range(10):
        lock = NonBlockingLock()
        res, _ = run_recorded(par(try_lock(lock), try_lock(lock)), seed=seed)
        assert sorted(res) == [False, True]


def test_double_unlock_asserts():
    lock = NonBlockingLock()

    def prog():
        yield from try_lock(lock)
        yield from unlock(lock)
        yield from unlock(lock)

    with pytest.raises(AssertionError):
        run_recorded(prog())


def test_barrier_notify_before_wait():
    b = Barrier()

    def prog():
        before = yield from barrier_notified(b)
        yield from barrier_notify(b)
        yield from barrier_wait(b)
        return before, (yield from barrier_notified(b))

    assert run_recorded(prog())[0] == (False, True)


def test_barrier_wait_resumed_by_notifier():
    for seed in range(10):
        b = Barrier()
        log = []

        def waiter():
            yield from barrier_wait(b)
            log.append(b.cond.value)

        def notifier():
            yield tick(5)
            yield from barrier_notify(b)

        run_recorded(par(waiter(), notifier()), seed=seed)
        assert log == [True]


def test_barrier_second_waiter_asserts():
    b = Barrier()

    def prog():
        yield from barrier_notify(b)
        yield from barrier_wait(b)
        yield from barrier_wait(b)

    with pytest.raises(AssertionError):
        run_recorded(prog())


def _wrapper_with_occupancy():
    state = {"inside": 0, "max": 0, "starts": []}
    clock = Cell(0)

    def body():
        state["inside"] += 1
        state["max"] = max(state["max"], state["inside"])
        state["starts"].append((yield faa(clock, 1)))
        yield tick(3)
        state["inside"] -= 1

    return ReactivationWrapper(body), state, clock


def test_single_reactivate_runs_once():
    w, state, _ = _wrapper_with_occupancy()
    run_recorded(reactivate(w))
    assert w.runs == 1 and state["max"] == 1


@pytest.mark.parametrize("seed", range(5))
def test_many_reactivates(seed):
    w, state, clock = _wrapper_with_occupancy()
    calls = []

    def poke():
        calls.append((yield faa(clock, 1)))
        yield from reactivate(w)

    run_recorded(par(*(poke() for _ in range(100))), seed=seed)
    assert 1 <= w.runs <= 100
    assert state["max"] == 1
    # some run starts after the last reactivation call
    assert max(state["starts"]) > max(calls)


def test_reactivate_during_run_adds_a_run():
    w, state, _ = _wrapper_with_occupancy()

    def prog():
        yield from reactivate(w)
        yield TICK
        yield from reactivate(w)
        yield tick(20)

    run_recorded(prog())
    assert w.runs == 2 and state["max"] == 1


def test_sequential_loop_work_equals_span():
    def prog():
        for _ in range(100):
            yield TICK

    _, rec = run_recorded(prog())
    assert rec.work == rec.span == 100


def _tree(depth):
    if depth == 0:
        yield TICK
        return 1
    a, b = yield from par2(_tree(depth - 1), _tree(depth - 1))
    return a + b


def test_fork_tree_costs():
    spans = []
    for d in (6, 8, 10):
        res, rec = run_recorded(_tree(d))
        assert res == 2**d
        assert 2**d <= rec.work <= 8 * 2**d
        spans.append(rec.span)
    # span grows by a constant per level
    assert spans[1] - spans[0] == spans[2] - spans[1]
    assert spans[2] < 10 * 10


def test_determinism_and_seeds():
    r1 = run_recorded(_tree(6), seed=3)[1]
    r2 = run_recorded(_tree(6), seed=3)[1]
    assert (r1.work, r1.span, r1.time, r1.steps) == (r2.work, r2.span, r2.time, r2.steps)
    assert run_recorded(_tree(6), seed=4)[0] == 64


def test_step_budget():
    def forever():
        while True:
            yield TICK

    with pytest.raises(StepBudgetExceeded):
        run_recorded(forever(), budget=1000)


def test_processors_limit_time():
    _, free = run_recorded(_tree(6))
    _, one = run_recorded(_tree(6), processors=1)
    assert one.time >= one.work // 2 > free.time


def test_counters():
    def prog():
        count("hits", 2)
        count("hits")
        yield TICK

    assert run_recorded(prog())[1].counters["hits"] == 3


def test_trace_csv_and_linearizability():
    cells = [Cell(0, "x"), Cell(0, "y")]

    def worker(i):
        for j in range(5):
            c = cells[(i + j) % 2]
            yield faa(c, i + 1)
            yield write(c, j) if j % 3 == 0 else tas(c)

    _, rec = run_recorded(par(*(worker(i) for i in range(6))), seed=1, trace=True)
    csv_text = rec.to_csv()
    assert csv_text.startswith("node,weight,parents\n")
    assert len(csv_text.splitlines()) == len(rec.nodes) + 1
    assert sum(w for _, w, _ in rec.nodes) == rec.work
    for _cell, entries in rec.cell_traces.values():
        assert replay_cell_log(entries, 0)


def test_threaded_backend_agrees():
    c = Cell(0)

    def add():
        yield faa(c, 1)

    def prog():
        yield from par(*(add() for _ in range(16)))
        return (yield read(c))

    assert run(prog(), backend="threaded") == 16
    c.value = 0
    assert run(prog(), backend="real") == 16
    with pytest.raises(ValueError):
        run(prog(), backend="nope")


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from([FAA, TAS, CAS]), min_size=1, max_size=12), st.integers(0, 99))
def test_cells_linearize(ops, seed):
    c = Cell(0)

    def one(op):
        if op == FAA:
            yield rmw(c, FAA, 1)
        elif op == TAS:
            yield rmw(c, TAS)
        else:
            yield rmw(c, CAS, 0, 1)

    _, rec = run_recorded(par(*(one(op) for op in ops)), seed=seed, trace=True)
    for _cell, entries in rec.cell_traces.values():
        assert replay_cell_log(entries, 0)
