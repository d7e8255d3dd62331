"""Derived metrics and the results CSV.

Bandwidth is computed in bytes/ns and reported in MB/s (10**6 bytes per
second, so 1 byte/ns == 1000 MB/s). Latency is ns per 64-byte
transaction. MLP follows Little's Law: average latency times average
bandwidth, with bandwidth in transactions per ns.
"""

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .counters import canonical_event
from .errors import AnalysisError
from .pools import CACHE_LINE

BASE_COLUMNS = (
    "scenario", "stressors", "strategy_main", "strategy_stress", "pool_main",
    "pool_stress", "buffer_bytes", "iterations", "bw_med_MBps", "lat_med_ns",
)
_INT_COLUMNS = {"scenario", "stressors", "pool_main", "pool_stress", "buffer_bytes", "iterations"}
_STR_COLUMNS = {"strategy_main", "strategy_stress"}

MB_PER_S_PER_BYTE_PER_NS = 1000


@dataclass(frozen=True)
class MetricSummary:
    median: float
    q1: float
    q3: float
    min: float
    max: float
    units: str
    count: int = 0

    @classmethod
    def of(cls, values, units):
        v = np.sort(np.asarray(values, dtype=float))
        if v.size == 0:
            raise AnalysisError("no samples to summarize")
        q1, med, q3 = np.percentile(v, [25, 50, 75])
        return cls(float(med), float(q1), float(q3), float(v[0]), float(v[-1]), units, int(v.size))

    @property
    def spread(self):
        return self.max - self.min


class MlpEstimate(NamedTuple):
    latency_ns_per_tx: float
    bandwidth_tx_per_ns: float
    mlp: float


def bandwidth_samples(result):
    per_iter = result.bytes_per_iteration
    out = []
    for t in result.iteration_elapsed:
        if t <= 0:
            raise AnalysisError(f"scenario {result.scenario_index}: non-positive elapsed time {t}")
        out.append(per_iter / t)
    return out


def bandwidth_of(result):
    """Per-iteration bandwidth, bytes/ns."""
    return MetricSummary.of(bandwidth_samples(result), "bytes/ns")


def latency_of(result):
    """Per-iteration latency, ns per 64-byte transaction."""
    n = result.lines
    if n <= 0:
        raise AnalysisError(f"scenario {result.scenario_index}: latency chain has no lines")
    return MetricSummary.of([t / n for t in result.iteration_elapsed], "ns/Tx")


def mlp(latency_ns_per_tx, bandwidth_tx_per_ns):
    """Little's-Law MLP estimate, rounded to two decimals.

    Latency and bandwidth must come from paired experiments: (l,r) with
    (r,r), and (l,w) with (r,w). Exact for ``Fraction`` inputs.
    """
    if latency_ns_per_tx <= 0 or bandwidth_tx_per_ns <= 0:
        raise AnalysisError(
            f"latency and bandwidth must be positive, got {latency_ns_per_tx} and {bandwidth_tx_per_ns}"
        )
    return MlpEstimate(latency_ns_per_tx, bandwidth_tx_per_ns,
                       round(latency_ns_per_tx * bandwidth_tx_per_ns, 2))


def mlp_from_results(latency_result, bandwidth_result):
    lat = latency_of(latency_result).median
    bw = bandwidth_of(bandwidth_result).median / CACHE_LINE
    return mlp(lat, bw)


def hit_rate(l2_accesses, l2_refills):
    """Cache hit rate in percent, two decimals."""
    if l2_accesses <= 0:
        raise AnalysisError("hit rate needs a positive access count")
    if l2_refills < 0 or l2_refills > l2_accesses:
        raise AnalysisError(f"refills ({l2_refills}) must lie in [0, accesses={l2_accesses}]")
    return float(round((1 - Fraction(l2_refills, l2_accesses)) * 100, 2))


def cycles_per_access(cpu_cycles, l2_accesses):
    if l2_accesses <= 0:
        raise AnalysisError("cycles per access needs a positive access count")
    return float(round(Fraction(cpu_cycles, l2_accesses), 2))


# -- report rows -----------------------------------------------------------------

def counter_columns(result):
    cfg = result.config
    main = result.cores[result.roles.index("Main")]
    cols = []
    for core in result.cores:
        events = cfg.counters_main if core == main else cfg.counters_others
        cols += [(f"{canonical_event(e)}_core{core}", core, e) for e in events]
    return cols


def summarize_experiment(results):
    """One row per scenario, keyed by the fixed CSV column names."""
    rows = []
    for r in results:
        cfg = r.config
        strategy = cfg.main.strategy
        row = {
            "scenario": r.scenario_index,
            "stressors": r.stressors,
            "strategy_main": strategy.value,
            "strategy_stress": cfg.stress.strategy.value,
            "pool_main": cfg.main.pool_id,
            "pool_stress": cfg.stress.pool_id,
            "buffer_bytes": cfg.main.buffer_size,
            "iterations": r.iterations,
            "bw_med_MBps": None,
            "lat_med_ns": None,
        }
        if strategy.is_bandwidth:
            row["bw_med_MBps"] = bandwidth_of(r).median * MB_PER_S_PER_BYTE_PER_NS
        elif strategy.is_latency:
            row["lat_med_ns"] = latency_of(r).median
        for col, core, event in counter_columns(r):
            row[col] = r.counters.get(core, {}).get(event)
        rows.append(row)
    return rows


def scenario_label(row):
    n = row["stressors"]
    return f"{n} stressor" if n == 1 else f"{n} stressors"


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_results_csv(rows, out):
    """Write rows to a path or text stream; header is always emitted."""
    if isinstance(out, (str, bytes)) or hasattr(out, "__fspath__"):
        with open(out, "w", newline="") as f:
            return write_results_csv(rows, f)
    columns = list(BASE_COLUMNS)
    for row in rows:
        columns += [k for k in row if k not in columns]
    w = csv.writer(out)
    w.writerow(columns)
    for row in rows:
        w.writerow([_cell(row.get(c)) for c in columns])
    return columns


def _parse_cell(column, text):
    if text == "":
        return None
    if column in _STR_COLUMNS:
        return text
    if column in _INT_COLUMNS or "_core" in column:
        return int(text)
    return float(text)


def read_results_csv(source):
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source, newline="") as f:
            return read_results_csv(f)
    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise AnalysisError("results CSV is empty; a header is mandatory") from None
    if tuple(header[: len(BASE_COLUMNS)]) != BASE_COLUMNS:
        raise AnalysisError(f"results CSV header does not match the schema: {header}")
    for extra in header[len(BASE_COLUMNS):]:
        if "_core" not in extra:
            raise AnalysisError(f"unexpected results column {extra!r}")
    rows = []
    for rec in reader:
        if len(rec) != len(header):
            raise AnalysisError(f"row has {len(rec)} cells, header has {len(header)}")
        rows.append({c: _parse_cell(c, v) for c, v in zip(header, rec)})
    return rows


def results_csv_text(rows):
    buf = io.StringIO()
    write_results_csv(rows, buf)
    return buf.getvalue()


def write_iterations_csv(results, out):
    """Per-iteration timings (``scenario,stressors,iteration,elapsed_ns``) for box plots."""
    with open(out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["scenario", "stressors", "iteration", "elapsed_ns"])
        for r in results:
            for i, t in enumerate(r.iteration_elapsed):
                w.writerow([r.scenario_index, r.stressors, i, t])
