"""Discrete-event model of cores, a shared LLC, an interconnect and memories.

Time is an integer count of nanoseconds. Events at the same instant run
in (core id, module id, insertion) order, which is also the tie-break for
every arbitration decision.

Model summary:

* Cores are in-order. Each one runs a program (a generator) that yields
  memory operations or control items. Independent misses are
  non-blocking up to ``mshrs`` outstanding; a dependent load blocks until
  its data returns. Hits take the serial hit path.
* The LLC is set-associative with LRU replacement, write-allocate and
  write-back. A hit occupies one of ``hit_port_slots`` for
  ``hit_latency`` ns. A miss pays ``hit_latency`` for the tag lookup and
  then enters the interconnect.
* The interconnect has ``queue_entries`` slots; a transaction holds its
  slot from grant until its memory module completes it. Dirty write-backs
  are fire-and-forget but are granted ahead of demand requests; demand
  requests are granted round-robin across cores.
* A module services up to ``mlp_cap`` transactions at once, each taking
  ``idle_latency`` ns, FIFO beyond that.
"""

import heapq
from collections import deque

from ..errors import MemscopeError, WorkerFailure
from ..workloads import INV_SELF, LOAD, STORE, STREAM
from .model import partition_layout

WRITEBACK = 3
OP_NAMES = {LOAD: "load", STORE: "store", STREAM: "stream", WRITEBACK: "writeback"}

# trace record layout
TRACE_FIELDS = (
    "scenario", "core", "addr", "issue", "grant", "start", "complete",
    "hit", "module", "op", "fill",
)


class Tx:
    __slots__ = ("core", "addr", "module", "op", "issue", "grant", "start",
                 "fill", "dirty", "waiters")

    def __init__(self, core, addr, module, op, fill, dirty):
        self.core = core
        self.addr = addr
        self.module = module
        self.op = op
        self.fill = fill
        self.dirty = dirty
        self.waiters = None
        self.issue = self.grant = self.start = 0


class Cache:
    def __init__(self, params, ncores):
        self.ways = params.ways
        self.line_shift = params.line.bit_length() - 1
        self.sets = [dict() for _ in range(params.sets)]
        self.layout = partition_layout(params, ncores)

    def set_for(self, core, addr):
        first, count = self.layout.get(core, (0, len(self.sets)))
        return self.sets[first + (addr >> self.line_shift) % count]

    def insert(self, s, addr, dirty, module):
        """Fill ``addr`` into set ``s``; return the evicted ``(addr, entry)``."""
        entry = s.pop(addr, None)
        if entry is not None:
            entry[0] = entry[0] or dirty
            s[addr] = entry
            return None
        victim = None
        if len(s) >= self.ways:
            vaddr = next(iter(s))
            victim = (vaddr, s.pop(vaddr))
        s[addr] = [dirty, module]
        return victim

    def reset(self):
        for s in self.sets:
            s.clear()

    def occupancy(self):
        return sum(len(s) for s in self.sets)


class Module:
    def __init__(self, eng, params):
        self.eng = eng
        self.id = params.pool_id
        self.cap = params.mlp_cap
        self.latency = params.idle_latency
        self.busy = 0
        self.queue = deque()

    def submit(self, tx):
        if self.busy < self.cap:
            self._start(tx)
        else:
            self.queue.append(tx)

    def _start(self, tx):
        self.busy += 1
        eng = self.eng
        tx.start = eng.now
        eng.at(eng.now + self.latency, self._done, tx, tx.core, self.id)

    def _done(self, tx):
        self.busy -= 1
        if self.queue:
            self._start(self.queue.popleft())
        self.eng.bus.release()
        self.eng.complete(tx)


class Bus:
    def __init__(self, eng, entries, ncores):
        self.eng = eng
        self.entries = entries
        self.in_use = 0
        self.wbq = deque()
        self.q = [deque() for _ in range(ncores)]
        self.rr = 0
        self.waiting = 0

    def request(self, tx):
        if self.entries is None or (self.in_use < self.entries and not self.waiting):
            self._grant(tx)
            return
        self.waiting += 1
        if tx.op == WRITEBACK:
            self.wbq.append(tx)
        else:
            self.q[tx.core].append(tx)

    def _grant(self, tx):
        self.in_use += 1
        eng = self.eng
        tx.grant = eng.now
        eng.modules[tx.module].submit(tx)

    def release(self):
        self.in_use -= 1
        if not self.waiting:
            return
        if self.wbq:
            tx = self.wbq.popleft()
        else:
            n = len(self.q)
            for i in range(n):
                c = (self.rr + i) % n
                if self.q[c]:
                    tx = self.q[c].popleft()
                    self.rr = (c + 1) % n
                    break
        self.waiting -= 1
        self._grant(tx)


class HitPort:
    def __init__(self, eng, slots, latency, ncores):
        self.eng = eng
        self.slots = slots
        self.latency = latency
        self.busy = 0
        self.q = [deque() for _ in range(ncores)]
        self.rr = 0
        self.waiting = 0

    def request(self, core, op, entry):
        if self.busy < self.slots and not self.waiting:
            self._start(core, op, entry, self.eng.now)
        else:
            self.waiting += 1
            self.q[core.id].append((core, op, entry, self.eng.now))

    def _start(self, core, op, entry, t_req):
        self.busy += 1
        eng = self.eng
        eng.at(eng.now + self.latency, self._done, (core, op, entry, t_req, eng.now), core.id)

    def _done(self, arg):
        self.busy -= 1
        if self.waiting:
            n = len(self.q)
            for i in range(n):
                c = (self.rr + i) % n
                if self.q[c]:
                    item = self.q[c].popleft()
                    self.rr = (c + 1) % n
                    break
            self.waiting -= 1
            self._start(*item)
        core, op, entry, t_req, t_grant = arg
        core.hit_done(op, entry, t_req, t_grant)


# per-core counter slots
MEM_ACCESS, L2_ACCESS, L2_REFILL, L2_WB, BUS_ACCESS = range(5)
COUNTER_SLOTS = {
    "mem_access": MEM_ACCESS,
    "l2_access": L2_ACCESS,
    "l2_refill": L2_REFILL,
    "l2_writeback": L2_WB,
    "bus_access": BUS_ACCESS,
}
SIM_EVENTS = frozenset(COUNTER_SLOTS) | {"cycles"}


class Core:
    """An in-order core executing one program generator."""

    def __init__(self, eng, cid, program, module, mshrs):
        self.eng = eng
        self.id = cid
        self.prog = program
        self.module = module
        self.mshrs = mshrs
        self.outstanding = 0
        self.pending_op = None
        self.block = None
        self.waiting_tx = None
        self.done = False
        self.counts = [0] * len(COUNTER_SLOTS)

    def wake(self, _=None):
        self.eng.at(self.eng.now, self.resume, None, self.id)

    def resume(self, _=None):
        self.block = None
        prog = self.prog
        while True:
            item = self.pending_op
            if item is None:
                try:
                    item = next(prog)
                except StopIteration:
                    self.done = True
                    return
                except MemscopeError:
                    raise
                except Exception as exc:
                    raise WorkerFailure(self.id, repr(exc)) from exc
            else:
                self.pending_op = None
            head = item[0]
            if head.__class__ is str:
                if not self._control(item):
                    return
            elif not self._issue(item):
                return

    # -- control items ---------------------------------------------------------
    def _control(self, item):
        head = item[0]
        eng = self.eng
        if head == "fence":
            if self.outstanding == 0:
                return True
            self.block = "fence"
            return False
        if head == "delay":
            if item[1] <= 0:
                return True
            self.block = "delay"
            eng.at(eng.now + item[1], self.resume, None, self.id)
            return False
        if head == "wait":
            if item[1]():
                return True
            self.block = "wait"
            eng.waiters.append((self, item[1]))
            return False
        raise MemscopeError(f"unknown control item {head!r}")

    # -- memory operations -------------------------------------------------------
    def _issue(self, op):
        kind, addr, dep, inv = op
        eng = self.eng
        cache = eng.cache
        counts = self.counts
        if cache is None or kind == STREAM:
            if self.outstanding >= self.mshrs:
                self.pending_op = op
                self.block = "mshr"
                return False
            counts[MEM_ACCESS] += 1
            delay = 0
            if cache is not None:
                delay = eng.hit_latency
                s = cache.set_for(self.id, addr)
                s.pop(addr, None)  # overwritten whole, nothing to write back
            tx = Tx(self.id, addr, self.module, kind, False, False)
            self.outstanding += 1
            eng.send(tx, delay)
            if dep:
                self.waiting_tx = tx
                self.block = "dep"
                return False
            return True

        s = cache.set_for(self.id, addr)
        entry = s.get(addr)
        if entry is not None:
            counts[MEM_ACCESS] += 1
            counts[L2_ACCESS] += 1
            self.block = "hit"
            eng.port.request(self, op, entry)
            return False
        ptx = eng.pending.get(addr)
        if ptx is not None:
            if ptx.waiters is None:
                ptx.waiters = []
            ptx.waiters.append(self)
            self.pending_op = op
            self.block = "pending"
            return False
        if self.outstanding >= self.mshrs:
            self.pending_op = op
            self.block = "mshr"
            return False
        counts[MEM_ACCESS] += 1
        counts[L2_ACCESS] += 1
        tx = Tx(self.id, addr, self.module, kind, inv != INV_SELF, kind == STORE)
        eng.pending[addr] = tx
        self.outstanding += 1
        eng.send(tx, eng.hit_latency)
        if inv >= 0:
            self.invalidate(inv)
        if dep:
            self.waiting_tx = tx
            self.block = "dep"
            return False
        return True

    def hit_done(self, op, entry, t_req, t_grant):
        kind, addr, dep, inv = op
        eng = self.eng
        s = eng.cache.set_for(self.id, addr)
        if s.pop(addr, None) is not None:
            s[addr] = entry
            if kind == STORE:
                entry[0] = True
        if eng.trace is not None:
            eng.trace.append((eng.scenario, self.id, addr, t_req, t_grant, t_grant,
                              eng.now, 1, entry[1], kind, 0))
        if inv == INV_SELF:
            self.invalidate(addr)
        elif inv >= 0:
            self.invalidate(inv)
        self.resume()

    def invalidate(self, addr):
        s = self.eng.cache.set_for(self.id, addr)
        entry = s.pop(addr, None)
        if entry is not None and entry[0]:
            self.eng.writeback(self, addr, entry[1])

    def tx_done(self, tx):
        self.outstanding -= 1
        b = self.block
        if b == "dep":
            if self.waiting_tx is tx:
                self.waiting_tx = None
                self.wake()
        elif b == "mshr" or (b == "fence" and self.outstanding == 0):
            self.wake()


class Engine:
    def __init__(self, model, cache=None, t0=0, trace=None, scenario=0):
        self.model = model
        self.now = t0
        self.t0 = t0
        self._heap = []
        self._seq = 0
        n = model.cores.count
        if model.cache.enabled:
            self.cache = cache if cache is not None else Cache(model.cache, n)
            self.hit_latency = model.cache.hit_latency
        else:
            self.cache = None
            self.hit_latency = 0
        self.port = HitPort(self, model.cache.hit_port_slots, model.cache.hit_latency, n)
        self.bus = Bus(self, model.bus.queue_entries, n)
        self.modules = {pid: Module(self, p) for pid, p in model.modules.items()}
        self.cores = {}
        self.pending = {}
        self.waiters = []
        self.trace = trace
        self.scenario = scenario
        self.freq_mhz = model.cores.freq_mhz

    def add_core(self, cid, program, module):
        if module is not None and module not in self.modules:
            raise MemscopeError(f"core {cid} targets pool {module}, which has no module in the model")
        core = Core(self, cid, program, module, self.model.cores.mshrs)
        self.cores[cid] = core
        self.at(self.now, core.resume, None, cid)
        return core

    def at(self, t, fn, arg=None, core=0, module=0):
        self._seq += 1
        heapq.heappush(self._heap, (t, core, module, self._seq, fn, arg))

    def run(self):
        heap = self._heap
        pop = heapq.heappop
        while heap:
            t, _, _, _, fn, arg = pop(heap)
            self.now = t
            fn(arg)
        stuck = [c.id for c in self.cores.values() if not c.done]
        if stuck:
            raise MemscopeError(f"simulation deadlocked; cores {stuck} never finished")
        return self.now

    def notify(self):
        """Re-check programs waiting on a condition."""
        still = []
        for core, pred in self.waiters:
            if pred():
                core.wake()
            else:
                still.append((core, pred))
        self.waiters = still

    def send(self, tx, delay):
        tx.issue = self.now + delay
        self.cores[tx.core].counts[BUS_ACCESS] += 1
        self.at(tx.issue, self.bus.request, tx, tx.core, tx.module)

    def writeback(self, core, addr, module):
        core.counts[L2_WB] += 1
        tx = Tx(core.id, addr, module, WRITEBACK, False, False)
        self.send(tx, 0)

    def complete(self, tx):
        if self.trace is not None:
            self.trace.append((self.scenario, tx.core, tx.addr, tx.issue, tx.grant, tx.start,
                               self.now, 0, tx.module, tx.op, 1 if tx.fill else 0))
        if tx.op == WRITEBACK:
            return
        core = self.cores[tx.core]
        if tx.op != STREAM and self.cache is not None:
            if self.pending.get(tx.addr) is tx:
                del self.pending[tx.addr]
            if tx.fill:
                core.counts[L2_REFILL] += 1
                s = self.cache.set_for(tx.core, tx.addr)
                victim = self.cache.insert(s, tx.addr, tx.dirty, tx.module)
                if victim is not None and victim[1][0]:
                    self.writeback(core, victim[0], victim[1][1])
            if tx.waiters:
                for w in tx.waiters:
                    w.wake()
        core.tx_done(tx)

    def counter_values(self, core):
        c = self.cores[core]
        values = {name: c.counts[slot] for name, slot in COUNTER_SLOTS.items()}
        values["cycles"] = self.now * self.freq_mhz // 1000
        return values
