import csv
from collections import namedtuple

from ..workloads import LOAD, STORE
from .engine import OP_NAMES, TRACE_FIELDS, WRITEBACK

TraceRecord = namedtuple("TraceRecord", TRACE_FIELDS)

CSV_FIELDS = ("core", "addr", "issue", "complete", "hit", "module",
              "op", "mem", "fill", "grant", "start", "scenario")


def mem_kind(rec):
    """'read', 'write' or '' (served by the cache) for one record."""
    if rec.hit:
        return ""
    if rec.op == LOAD:
        return "read"
    if rec.op == STORE:
        return "read" if rec.fill else "write"
    return "write"


def max_overlap(intervals):
    """Largest number of half-open ``[start, end)`` intervals alive at once."""
    events = []
    for start, end in intervals:
        events.append((start, 1))
        events.append((end, -1))
    events.sort(key=lambda e: (e[0], e[1]))
    live = best = 0
    for _, d in events:
        live += d
        best = max(best, live)
    return best


class TransactionTrace:
    def __init__(self, records=None):
        self.raw = records if records is not None else []

    def __len__(self):
        return len(self.raw)

    def __iter__(self):
        return (TraceRecord._make(r) for r in self.raw)

    def select(self, **match):
        return [r for r in self if all(getattr(r, k) == v for k, v in match.items())]

    def memory(self):
        """Records that reached a memory module."""
        return [r for r in self if not r.hit]

    def module_concurrency(self, module):
        return max_overlap((r.start, r.complete) for r in self.memory() if r.module == module)

    def bus_concurrency(self):
        return max_overlap((r.grant, r.complete) for r in self.memory())

    def core_concurrency(self, core):
        """Peak in-flight demand transactions (write-backs excluded) for one core."""
        return max_overlap(
            (r.issue, r.complete) for r in self.memory() if r.core == core and r.op != WRITEBACK
        )

    def allocations(self, core=None):
        return sum(1 for r in self.memory() if r.fill and (core is None or r.core == core))

    def scenarios(self):
        return sorted({r.scenario for r in self})

    def span(self, scenario):
        rs = [r for r in self if r.scenario == scenario]
        return (min(r.issue for r in rs), max(r.complete for r in rs)) if rs else None

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(CSV_FIELDS)
            for r in self:
                w.writerow([r.core, f"{r.addr:#x}", r.issue, r.complete, r.hit, r.module,
                            OP_NAMES[r.op], mem_kind(r), r.fill, r.grant, r.start, r.scenario])

    @classmethod
    def from_csv(cls, path):
        names = {v: k for k, v in OP_NAMES.items()}
        out = []
        with open(path, newline="") as f:
            for row in csv.DictReader(f):
                out.append((int(row["scenario"]), int(row["core"]), int(row["addr"], 16),
                            int(row["issue"]), int(row["grant"]), int(row["start"]),
                            int(row["complete"]), int(row["hit"]), int(row["module"]),
                            names[row["op"]], int(row["fill"])))
        return cls(out)

