"""Start/finish signaling between the observed core and everyone else.

Each non-main core owns a started flag and a finished flag, both set once
per scenario. The timestamp is stored before the flag is set, so a reader
that observes the flag also observes the timestamp (``threading.Event``
gives the acquire/release ordering).
"""

import threading
import time

from ..errors import StopTimeout, WorkerFailure

DEFAULT_STOP_TIMEOUT = 30.0


class SyncCell:
    def __init__(self, cores, main_core, clock=time.monotonic_ns):
        self.main_core = main_core
        self.cores = [c for c in cores if c != main_core]
        self.clock = clock
        self.reset()

    def reset(self):
        self.started = {c: threading.Event() for c in self.cores}
        self.finished = {c: threading.Event() for c in self.cores}
        self.start_time = {}
        self.finish_time = {}
        self.running = threading.Event()
        self.running.set()
        self.measure_start = None
        self.measure_end = None
        self.stop_raised = None
        self.failure = None

    def _now(self, t):
        return self.clock() if t is None else t

    def signal_started(self, core, t=None):
        self.start_time[core] = self._now(t)
        self.started[core].set()

    def signal_finished(self, core, t=None):
        self.finish_time[core] = self._now(t)
        self.finished[core].set()

    def signal_failure(self, core, exc):
        if self.failure is None:
            self.failure = (core, exc)
        # unblock anyone waiting on this core
        if core in self.started:
            self.started[core].set()
            self.finished[core].set()

    def all_started(self):
        return all(e.is_set() for e in self.started.values())

    def all_finished(self):
        return all(e.is_set() for e in self.finished.values())

    def wait_all_started(self, timeout=DEFAULT_STOP_TIMEOUT):
        deadline = time.monotonic() + timeout
        for core, ev in self.started.items():
            if not ev.wait(max(0.0, deadline - time.monotonic())):
                raise WorkerFailure(core, f"did not start within {timeout} s")
        self.check_failure()

    def check_failure(self):
        if self.failure is not None:
            core, exc = self.failure
            raise WorkerFailure(core, exc)

    def begin_measurement(self, t=None):
        self.measure_start = self._now(t)

    def end_measurement(self, t=None):
        self.measure_end = self._now(t)

    def raise_stop(self, t=None):
        self.stop_raised = self._now(t)
        self.running.clear()

    @property
    def is_running(self):
        return self.running.is_set()

    def violations(self):
        """Ways in which the measured interval escaped the activity window."""
        out = []
        if self.measure_start is None or self.measure_end is None:
            return ["measurement interval was never recorded"]
        if self.measure_end < self.measure_start:
            out.append("measurement ended before it started")
        if self.stop_raised is not None and self.stop_raised < self.measure_end:
            out.append("stop raised before measurement ended")
        for c in self.cores:
            start = self.start_time.get(c)
            stop = self.finish_time.get(c)
            if start is None or start > self.measure_start:
                out.append(f"core {c} started after measurement began")
            if stop is None or stop < self.measure_end:
                out.append(f"core {c} finished before measurement ended")
        return out


def stop_protocol(sync, timeout=DEFAULT_STOP_TIMEOUT):
    """Clear the running flag and wait until every non-main core has finished.

    Raises :class:`StopTimeout` naming the first core that failed to
    acknowledge within ``timeout`` seconds.
    """
    sync.raise_stop()
    deadline = time.monotonic() + timeout
    for core, ev in sync.finished.items():
        if not ev.wait(max(0.0, deadline - time.monotonic())):
            raise StopTimeout(core, timeout)
    return sync
