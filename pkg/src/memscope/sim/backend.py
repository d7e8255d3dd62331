"""Simulator implementation of the backend contract."""

from dataclasses import dataclass, field

import numpy as np

from ..coordinator.plan import ScenarioRun
from ..coordinator.scenarios import Role
from ..counters import canonical_event, deltas
from ..errors import MemscopeError, WorkerFailure, WorkloadError
from ..workloads import AccessStrategy, WorkloadOutcome, iteration_ops, outcome_for
from .engine import SIM_EVENTS, Cache, Engine
from .model import check_model, default_model
from .trace import TransactionTrace

FENCE = ("fence",)


def default_base(pool_id):
    return pool_id << 40


@dataclass
class SimReport:
    outcomes: dict
    trace: TransactionTrace
    end_time: int = 0
    counters: dict = field(default_factory=dict)


def _address(workload, bases):
    buf = workload.buffer
    base = bases.get(buf.pool_id) if bases else None
    return (default_base(buf.pool_id) if base is None else base) + buf.offset


def _solo_program(eng, workload, base, times):
    for _ in range(workload.iterations):
        t0 = eng.now
        yield from iteration_ops(workload, base)
        yield FENCE
        times.append(eng.now - t0)


def simulate(streams, model=None, bases=None, trace=True, t0=0):
    """Run per-core workloads to completion, all starting at ``t0``.

    ``streams`` maps core id to a :class:`~memscope.workloads.Workload`;
    idle workloads contribute no traffic. Returns per-core outcomes and the
    transaction trace.
    """
    model = model or default_model()
    check_model(model)
    if not streams:
        raise MemscopeError("nothing to simulate")
    records = [] if trace else None
    eng = Engine(model, t0=t0, trace=records)
    times = {}
    for core, w in sorted(streams.items()):
        if core >= model.cores.count:
            raise MemscopeError(f"core {core} is not in the model ({model.cores.count} cores)")
        times[core] = []
        if w.strategy is AccessStrategy.IDLE:
            continue
        pool = w.buffer.pool_id
        if pool not in model.modules:
            raise MemscopeError(f"stream on core {core} targets pool {pool}, which is not in the model")
        eng.add_core(core, _solo_program(eng, w, _address(w, bases), times[core]), pool)
    end = eng.run()
    outcomes = {}
    for core, w in streams.items():
        if w.strategy is AccessStrategy.IDLE:
            outcomes[core] = WorkloadOutcome(0, 0, 0)
        else:
            outcomes[core] = outcome_for(w, times[core])
    counters = {c: eng.counter_values(c) for c in eng.cores}
    return SimReport(outcomes, TransactionTrace(records if records is not None else []), end, counters)


class SimBackend:
    """Deterministic virtual-time backend.

    ``delays(scenario, core) -> (start_ns, stop_ns)`` injects per-worker
    delays before a non-main core starts and before it acknowledges the
    stop signal. ``fail_at`` is a ``(scenario, core)`` pair whose worker
    raises mid-run, for exercising abort paths. With ``record_trace`` the
    transaction trace of every scenario accumulates in :attr:`trace`.
    """

    name = "sim"

    def __init__(self, model=None, record_trace=False, delays=None, fail_at=None):
        self.model = model or default_model()
        self.report = check_model(self.model)
        self.delays = delays
        self.fail_at = fail_at
        self.record_trace = record_trace
        self.trace = TransactionTrace()
        self.clock = 0
        self.bases = {}
        self.cache = Cache(self.model.cache, self.model.cores.count) if self.model.cache.enabled else None
        self.scenario_spans = []

    # -- contract --------------------------------------------------------------
    def online_cores(self):
        return list(range(self.model.cores.count))

    def attach(self, pool):
        if pool.id not in self.model.modules:
            raise MemscopeError(f"pool {pool.id} has no module in the simulator model")
        self.bases[pool.id] = pool.region.base
        pool.storage = lambda offset, length: np.zeros(length, dtype=np.uint8)

    def available_events(self):
        return SIM_EVENTS

    def run_workload(self, workload):
        report = simulate({0: workload}, self.model, self.bases, trace=self.record_trace, t0=self.clock)
        self.clock = report.end_time
        if self.record_trace:
            self.trace.raw.extend(report.trace.raw)
        return report.outcomes[0]

    def run_idle(self, stop_signal):
        """Busy-loop until virtual time ``stop_signal`` ns has elapsed."""
        delay = int(stop_signal)
        if delay < 0:
            raise WorkloadError("idle stop delay must be >= 0")
        self.clock += delay
        return WorkloadOutcome(0, 0, delay)

    def cache_hygiene(self):
        if self.cache is not None:
            self.cache.reset()

    # -- scenario execution ------------------------------------------------------
    def _delays(self, index, core):
        if self.delays is None:
            return 0, 0
        start, stop = self.delays(index, core)
        return int(start), int(stop)

    def run_scenario(self, plan, sync):
        for core in plan.cores:
            if core >= self.model.cores.count:
                raise MemscopeError(f"core {core} is not in the simulator model")
        records = self.trace.raw if self.record_trace else None
        eng = Engine(self.model, cache=self.cache, t0=self.clock, trace=records, scenario=plan.index)
        sync.clock = lambda: eng.now
        times = []
        snaps = {}

        def snapshot():
            return {c: eng.counter_values(c) for c in eng.cores}

        def fail_here(core):
            return self.fail_at is not None and self.fail_at == (plan.index, core)

        def main_program(w, base):
            yield ("wait", sync.all_started)
            for _ in range(plan.warmup_iterations):
                yield from iteration_ops(w, base)
                yield FENCE
            sync.begin_measurement(eng.now)
            snaps["before"] = snapshot()
            prev = eng.now
            for i in range(plan.iterations):
                yield from iteration_ops(w, base)
                yield FENCE
                times.append(eng.now - prev)
                prev = eng.now
            sync.end_measurement(eng.now)
            snaps["after"] = snapshot()
            sync.raise_stop(eng.now)
            eng.notify()
            yield ("wait", sync.all_finished)

        def stress_program(core, w, base):
            start_delay, stop_delay = self._delays(plan.index, core)
            yield ("delay", start_delay)
            sync.signal_started(core, eng.now)
            eng.notify()
            n = 0
            while sync.is_running:
                for op in iteration_ops(w, base):
                    yield op
                    n += 1
                    if fail_here(core) and n == 8:
                        raise WorkerFailure(core, "injected failure")
                    if not sync.is_running:
                        break
            yield FENCE
            yield ("delay", stop_delay)
            sync.signal_finished(core, eng.now)
            eng.notify()

        def idle_program(core):
            start_delay, stop_delay = self._delays(plan.index, core)
            yield ("delay", start_delay)
            sync.signal_started(core, eng.now)
            eng.notify()
            if fail_here(core):
                raise WorkerFailure(core, "injected failure")
            yield ("wait", lambda: not sync.is_running)
            yield ("delay", stop_delay)
            sync.signal_finished(core, eng.now)
            eng.notify()

        for core in plan.cores:
            act = plan.activities[core]
            if act.role is Role.MAIN:
                w = act.workload
                eng.add_core(core, main_program(w, self._base(w)), w.buffer.pool_id)
            elif act.workload is None or act.role is Role.IDLE:
                eng.add_core(core, idle_program(core), None)
            else:
                w = act.workload
                eng.add_core(core, stress_program(core, w, self._base(w)), w.buffer.pool_id)
        try:
            eng.run()
        finally:
            # drained or aborted, the next scenario starts after this instant
            self.clock = eng.now
        self.scenario_spans.append((plan.index, eng.t0, eng.now))

        counters = {}
        for core in plan.cores:
            events = plan.events_for(core)
            before = snaps["before"].get(core, {})
            after = snaps["after"].get(core, {})
            picked_b = {e: before.get(canonical_event(e)) for e in events}
            picked_a = {e: after.get(canonical_event(e)) for e in events}
            counters[core] = deltas(picked_b, picked_a)
        return ScenarioRun(times, counters, {"backend": self.name, "virtual_end": eng.now})

    def _base(self, w):
        buf = w.buffer
        return self.bases.get(buf.pool_id, default_base(buf.pool_id)) + buf.offset
