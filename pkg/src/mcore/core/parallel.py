"""Multi-process exploration over a shared queue of serialized states.

Each worker is a forked copy of the engine (hooks and subscribers come
along) with its own solver session.  States move between workers only as
bytes produced by :mod:`mcore.core.serialize`.
"""

from __future__ import annotations

import multiprocessing as mp
import queue as queue_mod
import random
import time
import traceback

from mcore.core.engine import EngineError, ExplorationReport
from mcore.core.serialize import deserialize_state, serialize_state
from mcore.smt.solver import set_default_config

_POLL = 0.002


class _Shared:
    def __init__(self, ctx, manager, next_id: int):
        self.queue = manager.list()
        self.lock = ctx.Lock()
        self.active = ctx.Value("i", 0, lock=False)
        self.next_id = ctx.Value("q", next_id, lock=False)
        self.created = ctx.Value("q", 0, lock=False)
        self.instructions = ctx.Value("q", 0, lock=False)
        self.stop = ctx.Value("b", 0, lock=False)


def _attach(engine, shared: _Shared, wid: int):
    """Rebind the engine's queue, id and limit plumbing to the shared objects."""
    cfg = engine.config
    report = engine._report

    def assign_id(state):
        with shared.lock:
            state.id = shared.next_id.value
            shared.next_id.value += 1
            shared.created.value += 1

    def count_instruction():
        report.instructions += 1
        if cfg.max_instructions is not None:
            with shared.lock:
                shared.instructions.value += 1

    def limits_hit():
        if shared.stop.value:
            return True
        if engine._deadline is not None and time.time() >= engine._deadline:
            report.timed_out = True
        elif cfg.max_instructions is not None and shared.instructions.value >= cfg.max_instructions:
            report.limit_reached = True
        elif cfg.max_states is not None and shared.created.value >= cfg.max_states:
            report.limit_reached = True
        else:
            return False
        shared.stop.value = 1
        return True

    def push(state):
        blob = serialize_state(state)
        with shared.lock:
            shared.queue.append(blob)

    engine._assign_id = assign_id
    engine._count_instruction = count_instruction
    engine._limits_hit = limits_hit
    engine._push = push
    engine._rng = random.Random(None if cfg.seed is None else cfg.seed * 7919 + wid)


def _take(engine, shared: _Shared):
    strategy = engine.config.strategy
    while True:
        if engine._limits_hit():
            return None
        with shared.lock:
            n = len(shared.queue)
            if n:
                if strategy == "fifo":
                    blob = shared.queue.pop(0)
                elif strategy == "lifo":
                    blob = shared.queue.pop()
                else:
                    blob = shared.queue.pop(engine._rng.randrange(n))
                shared.active.value += 1
                return blob
            if shared.active.value == 0:
                return None
        time.sleep(_POLL)


def _worker(engine, shared: _Shared, results, wid: int):
    payload = {"error": None}
    try:
        set_default_config(engine.config.solver)
        engine._report = ExplorationReport()
        _attach(engine, shared, wid)
        while True:
            blob = _take(engine, shared)
            if blob is None:
                break
            try:
                engine.explore_state(deserialize_state(blob))
            finally:
                with shared.lock:
                    shared.active.value -= 1
        rep = engine._report
        payload.update(
            outcomes=rep.outcomes,
            forks=rep.forks,
            concretizations=rep.concretizations,
            instructions=rep.instructions,
            timed_out=rep.timed_out,
            limit_reached=rep.limit_reached,
            parked=[serialize_state(s) for s in rep.parked],
            terminated=[serialize_state(s) for s in rep.terminated_states],
        )
    except BaseException as exc:  # report everything, the parent decides
        shared.stop.value = 1
        payload["error"] = f"{exc!r}\n{traceback.format_exc()}"
    results.put(payload)


def run_parallel(engine, initial) -> None:
    ctx = mp.get_context("fork")
    report = engine._report
    with ctx.Manager() as manager:
        shared = _Shared(ctx, manager, engine._next_id)
        for s in initial:
            shared.queue.append(serialize_state(s))
        results = ctx.Queue()
        procs = [ctx.Process(target=_worker, args=(engine, shared, results, i), daemon=True) for i in range(engine.config.workers)]
        for p in procs:
            p.start()
        payloads = []
        while len(payloads) < len(procs):
            try:
                payloads.append(results.get(timeout=0.5))
            except queue_mod.Empty:
                if not any(p.is_alive() for p in procs) and results.empty():
                    break
        for p in procs:
            p.join()
        leftovers = list(shared.queue)
        engine._next_id = shared.next_id.value
        report.states_created += shared.created.value
    errors = [p["error"] for p in payloads if p["error"]]
    if len(payloads) < len(procs):
        errors.append("a worker process died without reporting")
    if errors:
        raise EngineError("worker failed: " + errors[0])
    for p in payloads:
        report.outcomes.extend(p["outcomes"])
        report.forks += p["forks"]
        report.concretizations += p["concretizations"]
        report.instructions += p["instructions"]
        report.timed_out |= p["timed_out"]
        report.limit_reached |= p["limit_reached"]
        report.parked.extend(deserialize_state(b) for b in p["parked"])
        if engine.config.keep_states:
            report.terminated_states.extend(deserialize_state(b) for b in p["terminated"])
    report.ready = [deserialize_state(b) for b in leftovers]
    report.outcomes.sort(key=lambda o: o.state_id)
