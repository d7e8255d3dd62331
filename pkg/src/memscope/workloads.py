"""Access strategies, buffer initialization and workload entry points.

Each strategy is a single-letter code:

====  ==========================================================
r     sequential cacheable reads (read bandwidth)
w     sequential cacheable writes (write bandwidth, write-allocate)
l     dependent random reads over a latency chain (latency)
s     non-cacheable version of ``r``
x     non-cacheable version of ``w``
m     non-cacheable version of ``l``
y     write streaming, no write-allocate
idle  busy loop that stays off the memory system
====  ==========================================================

Bandwidth and latency kernels are expressed twice: the native backend runs
compiled loops over real memory, while the simulator consumes the per-line
operation streams produced by :func:`iteration_ops`.
"""

import enum
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import WorkloadError
from .pools import CACHE_LINE, PoolBuffer

DEFAULT_ITERATIONS = 500
DEFAULT_WORD_BYTES = 8

# Reserved for the non-temporal paired load/store kernels; never executable.
RESERVED_STRATEGIES = {"n": "non-temporal paired load/store (reserved)"}


class AccessStrategy(str, enum.Enum):
    READ = "r"
    WRITE = "w"
    LATENCY = "l"
    NC_READ = "s"
    NC_WRITE = "x"
    NC_LATENCY = "m"
    WRITE_STREAM = "y"
    IDLE = "idle"

    @classmethod
    def parse(cls, code):
        if isinstance(code, cls):
            return code
        if code in RESERVED_STRATEGIES:
            raise WorkloadError(f"strategy code {code!r} is reserved: {RESERVED_STRATEGIES[code]}")
        try:
            return cls(code)
        except ValueError:
            raise WorkloadError(f"unknown strategy code {code!r}") from None

    @property
    def is_bandwidth(self):
        return self in _BANDWIDTH

    @property
    def is_latency(self):
        return self in (AccessStrategy.LATENCY, AccessStrategy.NC_LATENCY)

    @property
    def cacheable(self):
        return self in (AccessStrategy.READ, AccessStrategy.WRITE, AccessStrategy.LATENCY)

    @property
    def writes(self):
        return self in (AccessStrategy.WRITE, AccessStrategy.NC_WRITE, AccessStrategy.WRITE_STREAM)

    def __str__(self):
        return self.value


_BANDWIDTH = frozenset(
    {
        AccessStrategy.READ,
        AccessStrategy.WRITE,
        AccessStrategy.NC_READ,
        AccessStrategy.NC_WRITE,
        AccessStrategy.WRITE_STREAM,
    }
)


class NcVariant(str, enum.Enum):
    """How non-cacheable reads evict their lines.

    ``DCADD`` cleans and invalidates the line it just read, so no access
    ever hits. ``DCAFTER`` invalidates the following line instead, which
    leaves the first line of each pass cached.
    """

    DCADD = "dcadd"
    DCAFTER = "dcafter"


# -- latency chain -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LatencyChain:
    lines: int
    next: np.ndarray
    start: int = 0

    def walk(self):
        """Line indices visited in one pass, beginning at ``start``."""
        out = [self.start]
        p = int(self.next[self.start])
        while p != self.start:
            out.append(p)
            p = int(self.next[p])
        return out

    def __eq__(self, other):
        return (
            isinstance(other, LatencyChain)
            and self.lines == other.lines
            and self.start == other.start
            and np.array_equal(self.next, other.next)
        )


def init_latency_chain(n, seed):
    """Build a randomized single-cycle chain over ``n`` cache lines.

    The sequential chain ``i -> i+1`` is replaced by following a seeded
    uniform permutation ``perm``: line ``perm[i]`` points at line
    ``perm[(i + 1) % n]``, so the chain is one cycle through every line.
    """
    if n < 1:
        raise WorkloadError(f"latency chain needs at least one line, got {n}")
    nxt = (np.arange(n, dtype=np.int64) + 1) % n
    perm = np.random.default_rng(seed).permutation(n)
    nxt[perm] = np.roll(perm, -1)
    return LatencyChain(n, nxt, int(perm[0]))


def _words(buffer, word_bytes):
    if buffer.backing is None:
        raise WorkloadError(f"buffer at pool {buffer.pool_id} offset {buffer.offset:#x} has no backing storage")
    dtype = {4: np.uint32, 8: np.uint64}[word_bytes]
    return buffer.backing.view(dtype)


def init_bandwidth_buffer(buffer, word_bytes=DEFAULT_WORD_BYTES):
    if buffer.length < CACHE_LINE:
        raise WorkloadError(f"bandwidth buffer shorter than one cache line ({buffer.length} bytes)")
    words = _words(buffer, word_bytes)
    words[:] = np.arange(len(words), dtype=words.dtype)
    return buffer


def verify_bandwidth_buffer(buffer, word_bytes=DEFAULT_WORD_BYTES):
    """Indices of words that no longer hold their initial value."""
    words = _words(buffer, word_bytes)
    return np.flatnonzero(words != np.arange(len(words), dtype=words.dtype)).tolist()


def write_latency_chain(buffer, chain, word_bytes=DEFAULT_WORD_BYTES):
    """Store the chain in memory: the first word of line i holds next[i]."""
    words = _words(buffer, word_bytes)
    per_line = CACHE_LINE // word_bytes
    if chain.lines * per_line > len(words):
        raise WorkloadError("latency chain longer than its buffer")
    words[: chain.lines * per_line : per_line] = chain.next
    return buffer


# -- workload descriptions ---------------------------------------------------------

@dataclass
class Workload:
    strategy: AccessStrategy
    buffer: Optional[PoolBuffer]
    iterations: int = DEFAULT_ITERATIONS
    chain: Optional[LatencyChain] = None
    nc_variant: NcVariant = NcVariant.DCADD
    word_bytes: int = DEFAULT_WORD_BYTES

    def __post_init__(self):
        self.strategy = AccessStrategy.parse(self.strategy)
        self.nc_variant = NcVariant(self.nc_variant)

    @property
    def lines(self):
        if self.strategy.is_latency:
            return self.chain.lines if self.chain is not None else 0
        return self.buffer.length // CACHE_LINE if self.buffer is not None else 0

    @property
    def bytes_per_iteration(self):
        if self.strategy is AccessStrategy.IDLE:
            return 0
        return self.lines * CACHE_LINE


@dataclass
class WorkloadOutcome:
    bytes_touched: int
    line_accesses: int
    elapsed: int
    counter_samples: dict = field(default_factory=dict)
    iteration_elapsed: list = field(default_factory=list)


def check_bandwidth(workload):
    if not workload.strategy.is_bandwidth:
        raise WorkloadError(f"strategy {workload.strategy} is not a bandwidth strategy")
    if workload.buffer is None or workload.buffer.length < CACHE_LINE:
        raise WorkloadError("bandwidth buffer shorter than one cache line")
    if workload.iterations < 1:
        raise WorkloadError(f"iterations must be >= 1, got {workload.iterations}")


def check_latency(workload):
    if not workload.strategy.is_latency:
        raise WorkloadError(f"strategy {workload.strategy} is not a latency strategy")
    if workload.chain is None:
        raise WorkloadError("latency workload has no initialized chain")
    if workload.iterations < 1:
        raise WorkloadError(f"iterations must be >= 1, got {workload.iterations}")


# -- per-line operation streams (simulator view) ------------------------------------

LOAD, STORE, STREAM = 0, 1, 2
NO_INV, INV_SELF = -1, -2


def iteration_ops(workload, base):
    """Yield ``(op, addr, dependent, invalidate)`` for one pass over the buffer.

    ``invalidate`` is ``NO_INV``, ``INV_SELF`` (clean+invalidate the accessed
    line once it completes) or the address of another line to invalidate
    right after issue.
    """
    s = workload.strategy
    line = CACHE_LINE
    dcadd = workload.nc_variant is NcVariant.DCADD
    if s.is_latency:
        chain = workload.chain
        nxt = chain.next
        p = chain.start
        nc = s is AccessStrategy.NC_LATENCY
        while True:
            q = int(nxt[p])
            if not nc:
                inv = NO_INV
            else:
                inv = INV_SELF if dcadd else base + q * line
            yield (LOAD, base + p * line, True, inv)
            p = q
            if p == chain.start:
                return
    n = workload.lines
    end = base + n * line
    if s is AccessStrategy.READ:
        for a in range(base, end, line):
            yield (LOAD, a, False, NO_INV)
    elif s is AccessStrategy.WRITE:
        for a in range(base, end, line):
            yield (STORE, a, False, NO_INV)
    elif s is AccessStrategy.NC_READ:
        for a in range(base, end, line):
            yield (LOAD, a, False, INV_SELF if dcadd else a + line)
    elif s is AccessStrategy.NC_WRITE:
        for a in range(base, end, line):
            yield (STORE, a, False, a + line)
    elif s is AccessStrategy.WRITE_STREAM:
        for a in range(base, end, line):
            yield (STREAM, a, False, NO_INV)
    else:
        raise WorkloadError(f"strategy {s} has no memory operations")


# -- entry points -----------------------------------------------------------------------

def run_bandwidth(strategy, buffer, iterations, backend, **kw):
    workload = Workload(strategy, buffer, iterations, **kw)
    check_bandwidth(workload)
    return backend.run_workload(workload)


def run_latency(strategy, buffer, chain, iterations, backend, **kw):
    workload = Workload(strategy, buffer, iterations, chain=chain, **kw)
    check_latency(workload)
    return backend.run_workload(workload)


def run_idle(stop_signal, backend):
    return backend.run_idle(stop_signal)


def outcome_for(workload, iteration_elapsed, counters=None):
    """Backend-independent bookkeeping for a completed run."""
    accesses = workload.lines * len(iteration_elapsed)
    return WorkloadOutcome(
        bytes_touched=accesses * CACHE_LINE,
        line_accesses=accesses,
        elapsed=int(sum(iteration_elapsed)),
        counter_samples=dict(counters or {}),
        iteration_elapsed=list(iteration_elapsed),
    )
