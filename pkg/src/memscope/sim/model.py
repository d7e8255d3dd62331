"""Simulator parameters, their validation, and the flat model-file format.

A model file holds one ``key = value`` pair per line; ``#`` starts a
comment. Recognized keys::

    cores = 4
    core.mshrs = 8                 # outstanding misses per core
    core.freq_mhz = 1500           # converts virtual ns into cycles
    bus.queue_entries = 8          # or "inf"
    bus.arbitration = round-robin
    cache.size = 1M                # 0 disables the cache
    cache.ways = 16
    cache.line = 64
    cache.hit_latency_ns = 3
    cache.hit_port_slots = 1
    cache.partition.<core> = 1/4   # fraction of sets usable by <core>
    module.<pool>.name = dram
    module.<pool>.latency_ns = 160
    module.<pool>.mlp_cap = 5
"""

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import NamedTuple, Optional

from ..errors import ConfigSyntaxError, ModelError

CACHE_LINE = 64


@dataclass(frozen=True)
class SimModuleParams:
    pool_id: int
    idle_latency: int
    mlp_cap: int
    name: str = ""


@dataclass(frozen=True)
class SimBusParams:
    queue_entries: Optional[int] = 8  # None means unbounded
    arbitration: str = "round-robin"


@dataclass(frozen=True)
class SimCacheParams:
    size: int = 1 << 20
    line: int = CACHE_LINE
    ways: int = 16
    policy: str = "wawb"
    hit_latency: int = 3
    hit_port_slots: int = 1
    partition: dict = field(default_factory=dict)

    @property
    def enabled(self):
        return self.size > 0

    @property
    def sets(self):
        return self.size // (self.line * self.ways) if self.enabled else 0


@dataclass(frozen=True)
class SimCoreParams:
    count: int = 4
    mshrs: int = 8
    freq_mhz: int = 1500


@dataclass(frozen=True)
class SimSystemModel:
    modules: dict
    cores: SimCoreParams = SimCoreParams()
    bus: SimBusParams = SimBusParams()
    cache: SimCacheParams = SimCacheParams()

    def with_changes(self, cores=None, bus=None, cache=None, modules=None):
        """Copy with some sections replaced; each argument is a dict of field overrides."""
        m = self
        if cores:
            m = replace(m, cores=replace(m.cores, **cores))
        if bus:
            m = replace(m, bus=replace(m.bus, **bus))
        if cache:
            m = replace(m, cache=replace(m.cache, **cache))
        if modules:
            mods = dict(m.modules)
            for pid, changes in modules.items():
                mods[pid] = replace(mods[pid], **changes)
            m = replace(m, modules=mods)
        return m


def default_model():
    """Four in-order cores, a 1 MiB shared LLC with one hit port, an
    8-entry interconnect queue, DRAM as pool 1 and PL-DRAM as pool 2."""
    return SimSystemModel(
        modules={
            1: SimModuleParams(1, 160, 5, "dram"),
            2: SimModuleParams(2, 400, 4, "pldram"),
        }
    )


class ModelReport(NamedTuple):
    errors: list
    warnings: list

    @property
    def ok(self):
        return not self.errors


def partition_layout(cache, ncores):
    """Per-core ``(first_set, set_count)``.

    Cores sharing the same fraction < 1 share one set range; the distinct
    ranges are laid out back to back in order of their lowest core id.
    Cores without a partition see every set.
    """
    nsets = cache.sets
    layout = {}
    ranges = {}
    cursor = 0
    for core in range(ncores):
        frac = Fraction(cache.partition.get(core, 1))
        if frac >= 1:
            layout[core] = (0, nsets)
            continue
        if frac not in ranges:
            count = int(frac * nsets)
            ranges[frac] = (cursor, count)
            cursor += count
        layout[core] = ranges[frac]
    return layout


def validate_model(model):
    errors, warnings = [], []
    if not model.modules:
        errors.append("model has no memory modules")
    for pid, mod in model.modules.items():
        if mod.pool_id != pid:
            errors.append(f"module {pid}: pool_id {mod.pool_id} does not match its key")
        if not isinstance(mod.idle_latency, int) or mod.idle_latency <= 0:
            errors.append(f"module {pid}: idle_latency must be a positive integer ns, got {mod.idle_latency!r}")
        if mod.mlp_cap < 1:
            errors.append(f"module {pid}: mlp_cap must be >= 1, got {mod.mlp_cap}")
    q = model.bus.queue_entries
    if q is not None and q < 1:
        errors.append(f"bus: queue_entries must be >= 1, got {q}")
    if model.bus.arbitration != "round-robin":
        errors.append(f"bus: unsupported arbitration {model.bus.arbitration!r}")
    caps = [m.mlp_cap for m in model.modules.values()]
    if q is not None and caps and q < max(caps):
        warnings.append(f"bus: queue_entries {q} < largest mlp_cap {max(caps)}; module concurrency cap unreachable")
    c = model.cores
    if c.count < 1:
        errors.append(f"cores: count must be >= 1, got {c.count}")
    if c.mshrs < 1:
        errors.append(f"cores: mshrs must be >= 1, got {c.mshrs}")
    if c.freq_mhz <= 0:
        errors.append(f"cores: freq_mhz must be positive, got {c.freq_mhz}")
    k = model.cache
    if k.line != CACHE_LINE:
        errors.append(f"cache: line must be {CACHE_LINE} bytes, got {k.line}")
    if k.policy != "wawb":
        errors.append(f"cache: unsupported policy {k.policy!r}")
    if k.size < 0:
        errors.append("cache: size must be >= 0")
    if k.size > 0:
        if k.ways < 1 or k.size % (k.line * k.ways):
            errors.append(f"cache: size {k.size} is not a whole number of {k.ways}-way sets")
        if k.hit_latency < 0:
            errors.append("cache: hit_latency must be >= 0")
        if k.hit_port_slots < 1:
            errors.append(f"cache: hit_port_slots must be >= 1, got {k.hit_port_slots}")
        distinct = set()
        for core, frac in k.partition.items():
            frac = Fraction(frac)
            if not 0 < frac <= 1:
                errors.append(f"cache: partition fraction for core {core} must be in (0, 1], got {frac}")
                continue
            if core >= c.count or core < 0:
                errors.append(f"cache: partition names core {core}, model has {c.count} cores")
            if frac < 1:
                distinct.add(frac)
                sets = frac * k.sets if k.sets else 0
                if sets < 1 or sets.denominator != 1:
                    errors.append(f"cache: partition {frac} of {k.sets} sets is not a whole number of sets")
        if sum(distinct) > 1:
            errors.append(f"cache: partitions {sorted(map(str, distinct))} cover more than the whole cache")
    return ModelReport(errors, warnings)


def check_model(model):
    report = validate_model(model)
    if report.errors:
        raise ModelError(report.errors)
    return report


# -- model file -----------------------------------------------------------------

_SUFFIX = {"k": 1 << 10, "m": 1 << 20, "g": 1 << 30}


def _int(text):
    t = text.strip().lower()
    if t and t[-1] in _SUFFIX:
        return int(t[:-1], 0) * _SUFFIX[t[-1]]
    return int(t, 0)


def parse_model(text, base=None):
    """Parse model-file text. Keys not given keep their value from ``base``
    (the default model when ``base`` is None); a file that declares any
    module replaces the base module set."""
    base = base or default_model()
    cores = {}
    bus = {}
    cache = {}
    partition = dict(base.cache.partition)
    modules = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigSyntaxError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        parts = key.split(".")
        try:
            if key == "cores":
                cores["count"] = _int(value)
            elif key == "core.mshrs":
                cores["mshrs"] = _int(value)
            elif key == "core.freq_mhz":
                cores["freq_mhz"] = _int(value)
            elif key == "bus.queue_entries":
                bus["queue_entries"] = None if value.lower() in ("inf", "infinite", "none") else _int(value)
            elif key == "bus.arbitration":
                bus["arbitration"] = value
            elif key == "cache.size":
                cache["size"] = _int(value)
            elif key == "cache.ways":
                cache["ways"] = _int(value)
            elif key == "cache.line":
                cache["line"] = _int(value)
            elif key == "cache.policy":
                cache["policy"] = value
            elif key in ("cache.hit_latency_ns", "cache.hit_latency"):
                cache["hit_latency"] = _int(value)
            elif key == "cache.hit_port_slots":
                cache["hit_port_slots"] = _int(value)
            elif len(parts) == 3 and parts[:2] == ["cache", "partition"]:
                partition[int(parts[2])] = Fraction(value)
            elif len(parts) == 3 and parts[0] == "module":
                pid = int(parts[1])
                mod = modules.setdefault(pid, {"pool_id": pid, "name": f"module{pid}"})
                if parts[2] == "name":
                    mod["name"] = value
                elif parts[2] in ("latency_ns", "latency", "idle_latency"):
                    mod["idle_latency"] = _int(value)
                elif parts[2] == "mlp_cap":
                    mod["mlp_cap"] = _int(value)
                else:
                    raise ConfigSyntaxError(f"unknown module key {key!r}", lineno)
            else:
                raise ConfigSyntaxError(f"unknown key {key!r}", lineno)
        except (ValueError, ZeroDivisionError):
            raise ConfigSyntaxError(f"bad value {value!r} for {key!r}", lineno) from None
    if modules:
        mods = {}
        for pid, fields_ in modules.items():
            missing = {"idle_latency", "mlp_cap"} - set(fields_)
            if missing:
                raise ConfigSyntaxError(f"module {pid} lacks {', '.join(sorted(missing))}")
            mods[pid] = SimModuleParams(**fields_)
    else:
        mods = dict(base.modules)
    return SimSystemModel(
        modules=mods,
        cores=replace(base.cores, **cores),
        bus=replace(base.bus, **bus),
        cache=replace(base.cache, partition=partition, **cache),
    )


def render_model(model):
    c, b, k = model.cores, model.bus, model.cache
    lines = [
        f"cores = {c.count}",
        f"core.mshrs = {c.mshrs}",
        f"core.freq_mhz = {c.freq_mhz}",
        f"bus.queue_entries = {'inf' if b.queue_entries is None else b.queue_entries}",
        f"bus.arbitration = {b.arbitration}",
        f"cache.size = {k.size}",
        f"cache.ways = {k.ways}",
        f"cache.line = {k.line}",
        f"cache.policy = {k.policy}",
        f"cache.hit_latency_ns = {k.hit_latency}",
        f"cache.hit_port_slots = {k.hit_port_slots}",
    ]
    for core in sorted(k.partition):
        lines.append(f"cache.partition.{core} = {Fraction(k.partition[core])}")
    for pid in sorted(model.modules):
        m = model.modules[pid]
        lines += [
            f"module.{pid}.name = {m.name}",
            f"module.{pid}.latency_ns = {m.idle_latency}",
            f"module.{pid}.mlp_cap = {m.mlp_cap}",
        ]
    return "\n".join(lines) + "\n"


def effective_concurrency(model, pool_id):
    """Upper bound on one core's in-flight misses to ``pool_id``."""
    q = model.bus.queue_entries
    return min(model.cores.mshrs, model.modules[pool_id].mlp_cap, math.inf if q is None else q)
