"""Real-hardware backend: pinned worker threads timed with a monotonic clock.

User space cannot mask interrupts, disable preemption or issue cache
maintenance instructions. The backend compensates where it can: workers
are pinned and niced to the highest priority the OS permits, the main
activity runs discarded warm-up iterations, non-cacheable strategies are
only trusted on buffers larger than the last-level cache, and the spread
of per-iteration timings is recorded in the run metadata.
"""

import glob
import logging
import mmap
import os
import statistics
import threading
import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from ..coordinator.plan import ScenarioRun
from ..coordinator.scenarios import Role
from ..coordinator.sync import stop_protocol
from ..counters import NullCounterProvider, deltas
from ..errors import PinningError, WorkerFailure, WorkloadError
from ..pools import CACHE_LINE
from ..workloads import AccessStrategy, WorkloadOutcome, outcome_for
from . import kernels

log = logging.getLogger(__name__)

IDLE_SPIN_CHUNK = 100_000
DEFAULT_LLC = 1 << 20


@dataclass(frozen=True)
class CoreSet:
    online: tuple
    observed: int = 0
    pinning: bool = True

    def __post_init__(self):
        if not self.online:
            raise PinningError("no online cores")
        if self.observed not in self.online:
            raise PinningError(f"observed core {self.observed} is not online")

    @classmethod
    def detect(cls, observed=None):
        if hasattr(os, "sched_getaffinity"):
            online = tuple(sorted(os.sched_getaffinity(0)))
            pinning = hasattr(os, "sched_setaffinity")
        else:  # pragma: no cover - non-Linux
            online = tuple(range(os.cpu_count() or 1))
            pinning = False
        return cls(online, online[0] if observed is None else observed, pinning)


class PinnedContext(NamedTuple):
    core: int
    pinned: bool
    warning: str = ""


def pin_worker(core, cores):
    """Pin the calling thread to ``core``.

    Raises :class:`PinningError` for a core that is not online. When the
    OS cannot pin, the context is returned unpinned with a warning.
    """
    if core not in cores.online:
        raise PinningError(f"core {core} is not online (online: {list(cores.online)})")
    if not cores.pinning:
        return PinnedContext(core, False, f"pinning unsupported; core {core} runs unpinned")
    try:
        os.sched_setaffinity(0, {core})
    except OSError as exc:
        return PinnedContext(core, False, f"could not pin to core {core}: {exc}")
    got = os.sched_getaffinity(0)
    if got != {core}:
        return PinnedContext(core, False, f"affinity query returned {sorted(got)}, wanted {core}")
    return PinnedContext(core, True)


class TimedRun(NamedTuple):
    elapsed: int
    bytes: int


def timed_run(kernel, nbytes=0):
    """Run ``kernel()`` once between two monotonic clock reads."""
    t0 = time.monotonic_ns()
    kernel()
    t1 = time.monotonic_ns()
    return TimedRun(t1 - t0, nbytes)


def detect_llc_size():
    best_level, size = -1, None
    for idx in glob.glob("/sys/devices/system/cpu/cpu0/cache/index*"):
        try:
            with open(os.path.join(idx, "level")) as f:
                level = int(f.read())
            with open(os.path.join(idx, "size")) as f:
                text = f.read().strip()
        except (OSError, ValueError):
            continue
        mult = {"K": 1 << 10, "M": 1 << 20, "G": 1 << 30}.get(text[-1:], 1)
        value = int(text.rstrip("KMG")) * mult
        if level > best_level:
            best_level, size = level, value
    return size or DEFAULT_LLC


def _boost():
    """Best-effort highest non-realtime priority for the calling thread."""
    try:
        os.setpriority(os.PRIO_PROCESS, threading.get_native_id(), -20)
        return ""
    except (OSError, AttributeError) as exc:
        return f"priority unchanged: {exc}"


def make_kernel(workload):
    """A zero-argument callable performing one pass of ``workload``."""
    buf = workload.buffer
    if buf is None or buf.backing is None:
        raise WorkloadError("native kernels need buffers with backing storage")
    dtype = {4: np.uint32, 8: np.uint64}[workload.word_bytes]
    words = buf.backing.view(dtype)
    s = workload.strategy
    if s in (AccessStrategy.READ, AccessStrategy.NC_READ):
        return lambda: kernels.read_words(words)
    if s in (AccessStrategy.WRITE, AccessStrategy.NC_WRITE):
        value = dtype(0x5A5A5A5A)
        return lambda: kernels.write_words(words, value)
    if s is AccessStrategy.WRITE_STREAM:
        zero = dtype(0)
        return lambda: kernels.write_words(words, zero)
    if s.is_latency:
        if workload.chain is None:
            raise WorkloadError("latency workload has no initialized chain")
        start = workload.chain.start
        per_line = CACHE_LINE // workload.word_bytes
        return lambda: kernels.chase(words, start, per_line)
    raise WorkloadError(f"strategy {s} has no native kernel")


class NativeBackend:
    """Runs workloads on this machine.

    ``start_delays``/``stop_delays`` are optional ``(scenario, core) ->
    seconds`` hooks that stall a non-main worker before it signals start or
    finish; they exist to exercise the synchronization protocol.
    """

    name = "native"

    def __init__(self, cores=None, counters=None, llc_size=None, raise_priority=True,
                 hygiene_bytes=None, start_delays=None, stop_delays=None):
        self.coreset = cores or CoreSet.detect()
        self.counters = counters or NullCounterProvider()
        self.llc_size = llc_size or detect_llc_size()
        self.raise_priority = raise_priority
        self.hygiene_bytes = hygiene_bytes if hygiene_bytes is not None else 2 * self.llc_size
        self.start_delays = start_delays
        self.stop_delays = stop_delays
        self._maps = {}
        self._thrash = None
        self._warm = False

    def online_cores(self):
        return list(self.coreset.online)

    def attach(self, pool):
        mm = mmap.mmap(-1, pool.size)
        self._maps[pool.id] = mm
        pool.storage = lambda offset, length: np.frombuffer(mm, dtype=np.uint8, count=length, offset=offset)

    def _ensure_compiled(self):
        if not self._warm:
            kernels.warm_up()
            self._warm = True

    def _nc_warning(self, workload):
        if not workload.strategy.cacheable and workload.strategy is not AccessStrategy.IDLE:
            if workload.buffer.length <= self.llc_size:
                return (f"strategy {workload.strategy} on {workload.buffer.length}-byte buffer "
                        f"<= LLC ({self.llc_size}); non-cacheable behavior not guaranteed")
        return ""

    def run_workload(self, workload):
        self._ensure_compiled()
        warning = self._nc_warning(workload)
        if warning:
            log.warning(warning)
        kernel = make_kernel(workload)
        times = [timed_run(kernel).elapsed for _ in range(workload.iterations)]
        return outcome_for(workload, times)

    def run_idle(self, stop_signal):
        self._ensure_compiled()
        t0 = time.monotonic_ns()
        while not stop_signal.is_set():
            kernels.spin(IDLE_SPIN_CHUNK)
        return WorkloadOutcome(0, 0, time.monotonic_ns() - t0)

    def cache_hygiene(self):
        if self.hygiene_bytes <= 0:
            return
        if self._thrash is None:
            self._thrash = np.zeros(self.hygiene_bytes // 8, dtype=np.uint64)
        kernels.write_words(self._thrash, np.uint64(1))
        kernels.read_words(self._thrash)

    def _delay(self, hook, index, core):
        if hook is not None:
            d = hook(index, core)
            if d:
                time.sleep(d)

    def run_scenario(self, plan, sync):
        self._ensure_compiled()
        warnings = []
        sessions = {}
        errors = {}
        times = []
        out_counters = {}
        lock = threading.Lock()
        opened = threading.Barrier(len(plan.cores))

        def note(msg):
            if msg:
                with lock:
                    warnings.append(msg)

        def prepare(core, act):
            ctx = pin_worker(core, self.coreset)
            note(ctx.warning)
            if self.raise_priority:
                note(_boost())
            sessions[core] = self.counters.open(plan.events_for(core))
            kernel = make_kernel(act.workload) if act.workload is not None else None
            if act.workload is not None:
                note(self._nc_warning(act.workload))
            return kernel

        def main_worker(core, act):
            try:
                kernel = prepare(core, act)
            finally:
                opened.wait()
            sync.wait_all_started(plan.stop_timeout)
            for _ in range(plan.warmup_iterations):
                kernel()
            before = {c: s.read() for c, s in sessions.items()}
            sync.begin_measurement()
            for _ in range(plan.iterations):
                times.append(timed_run(kernel).elapsed)
            sync.end_measurement()
            after = {c: s.read() for c, s in sessions.items()}
            for c in before:
                out_counters[c] = deltas(before[c], after[c])

        def other_worker(core, act):
            try:
                kernel = prepare(core, act)
            finally:
                opened.wait()
            self._delay(self.start_delays, plan.index, core)
            sync.signal_started(core)
            if act.role is Role.STRESS and kernel is not None:
                while sync.is_running:
                    kernel()
            else:
                while sync.is_running:
                    kernels.spin(IDLE_SPIN_CHUNK)
            self._delay(self.stop_delays, plan.index, core)
            sync.signal_finished(core)

        def run(fn, core, act):
            try:
                fn(core, act)
            except BaseException as exc:  # reported to the coordinator below
                errors[core] = exc
                if core != plan.main_core:
                    sync.signal_failure(core, exc)

        threads = {}
        for core in plan.cores:
            act = plan.activities[core]
            fn = main_worker if act.role is Role.MAIN else other_worker
            t = threading.Thread(target=run, args=(fn, core, act), name=f"memscope-core{core}", daemon=True)
            threads[core] = t
            t.start()
        threads[plan.main_core].join()
        try:
            stop_protocol(sync, plan.stop_timeout)
        finally:
            for core, t in threads.items():
                if core != plan.main_core:
                    t.join(timeout=plan.stop_timeout)
            for s in sessions.values():
                s.close()
        if errors:
            core = min(errors)
            raise WorkerFailure(core, repr(errors[core])) from errors[core]
        meta = {"backend": self.name, "warnings": warnings}
        if len(times) > 1 and statistics.fmean(times) > 0:
            meta["elapsed_cv"] = statistics.pstdev(times) / statistics.fmean(times)
        return ScenarioRun(times, out_counters, meta)
