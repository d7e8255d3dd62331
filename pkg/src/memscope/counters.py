"""Counter event names and the provider contract.

A provider measures a region of code on the calling worker::

    with read_counters(provider, ["cycles", "l2_access"]) as deltas:
        run_the_kernel()
    deltas["cycles"]     # int, or None when the event is unavailable

Events a provider cannot count are reported as ``None``; they never abort
a run.
"""

import logging
from contextlib import contextmanager

log = logging.getLogger(__name__)

MAX_COUNTERS = 6

# canonical name -> accepted spellings (ARM PMU names included)
EVENT_ALIASES = {
    "cycles": ("cycles", "cpu_cycles", "cpu_cycle", "cycle"),
    "instructions": ("instructions", "inst_retired"),
    "mem_access": ("mem_access", "mem_accesses"),
    "l2_access": ("l2_access", "l2d_cache", "l2_accesses", "cache_references"),
    "l2_refill": ("l2_refill", "l2d_cache_refill", "l2_miss", "cache_misses"),
    "l2_writeback": ("l2_writeback", "l2d_cache_wb", "writebacks"),
    "bus_access": ("bus_access", "bus_tx"),
    "task_clock": ("task_clock",),
}

_LOOKUP = {alias: name for name, aliases in EVENT_ALIASES.items() for alias in aliases}


def canonical_event(name):
    """Canonical spelling of ``name``; unknown names pass through lowercased."""
    key = name.strip().lower()
    return _LOOKUP.get(key, key)


class NullCounterProvider:
    """Counts nothing; every event is absent."""

    name = "null"
    available = frozenset()
    per_core = False

    def open(self, events):
        return _NullSession(events)


class _NullSession:
    def __init__(self, events):
        self.events = list(events)

    def read(self):
        return {e: None for e in self.events}

    def close(self):
        pass


def deltas(before, after):
    out = {}
    for event, b in before.items():
        a = after.get(event)
        out[event] = None if a is None or b is None else max(0, a - b)
    return out


@contextmanager
def read_counters(provider, events):
    """Yield a dict that is filled with ``after - before`` on exit."""
    result = {}
    session = provider.open(list(events))
    try:
        before = session.read()
        yield result
        after = session.read()
        result.update(deltas(before, after))
    finally:
        session.close()
