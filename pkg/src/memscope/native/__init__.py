from .backend import (
    CoreSet,
    NativeBackend,
    PinnedContext,
    TimedRun,
    detect_llc_size,
    make_kernel,
    pin_worker,
    timed_run,
)
from .perf import PerfCounterProvider

__all__ = [
    "CoreSet",
    "NativeBackend",
    "PinnedContext",
    "TimedRun",
    "detect_llc_size",
    "make_kernel",
    "pin_worker",
    "timed_run",
    "PerfCounterProvider",
]
