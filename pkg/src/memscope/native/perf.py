"""Linux ``perf_event_open`` counter provider (per-thread, user-space only)."""

import ctypes
import logging
import os
import platform
import struct

from ..counters import canonical_event

log = logging.getLogger(__name__)

_SYSCALL = {"x86_64": 298, "aarch64": 241, "arm64": 241}

PERF_TYPE_HARDWARE = 0
PERF_TYPE_SOFTWARE = 1

# canonical event -> (type, config)
PERF_EVENTS = {
    "cycles": (PERF_TYPE_HARDWARE, 0),
    "instructions": (PERF_TYPE_HARDWARE, 1),
    "l2_access": (PERF_TYPE_HARDWARE, 2),  # generic cache-references
    "l2_refill": (PERF_TYPE_HARDWARE, 3),  # generic cache-misses
    "task_clock": (PERF_TYPE_SOFTWARE, 1),
}

_EXCLUDE_KERNEL = 1 << 5
_EXCLUDE_HV = 1 << 6


class _Attr(ctypes.Structure):
    _fields_ = [
        ("type", ctypes.c_uint32),
        ("size", ctypes.c_uint32),
        ("config", ctypes.c_uint64),
        ("sample_period", ctypes.c_uint64),
        ("sample_type", ctypes.c_uint64),
        ("read_format", ctypes.c_uint64),
        ("flags", ctypes.c_uint64),
        ("wakeup_events", ctypes.c_uint32),
        ("bp_type", ctypes.c_uint32),
        ("config1", ctypes.c_uint64),
        ("config2", ctypes.c_uint64),
    ]


def _open(kind, config):
    nr = _SYSCALL.get(platform.machine())
    if nr is None:
        return -1
    libc = ctypes.CDLL(None, use_errno=True)
    attr = _Attr()
    attr.type = kind
    attr.size = ctypes.sizeof(_Attr)
    attr.config = config
    attr.flags = _EXCLUDE_KERNEL | _EXCLUDE_HV
    return libc.syscall(nr, ctypes.byref(attr), 0, -1, -1, 0)


class PerfCounterProvider:
    """Counts events for the thread that opens the session."""

    name = "perf"
    per_core = True

    def __init__(self):
        self.available = frozenset(e for e in PERF_EVENTS if self._probe(e))

    @staticmethod
    def _probe(event):
        fd = _open(*PERF_EVENTS[event])
        if fd < 0:
            return False
        os.close(fd)
        return True

    def open(self, events):
        return _PerfSession(events, self.available)


class _PerfSession:
    def __init__(self, events, available):
        self.fds = {}
        for e in events:
            c = canonical_event(e)
            fd = _open(*PERF_EVENTS[c]) if c in available else -1
            self.fds[e] = fd if fd >= 0 else None

    def read(self):
        out = {}
        for e, fd in self.fds.items():
            out[e] = struct.unpack("Q", os.read(fd, 8))[0] if fd is not None else None
        return out

    def close(self):
        for fd in self.fds.values():
            if fd is not None:
                os.close(fd)
        self.fds = {e: None for e in self.fds}
