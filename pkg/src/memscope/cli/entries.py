"""Text front ends: the positional experiment line and counter sets.

Experiment line grammar (whitespace-separated fields, ``;``-separated
groups)::

    <map> <strategy> <size> <pool> ; <map> <strategy> <size> <pool> [; <iterations> [<seed>]]

The first group describes the observed core, the second every stressor.
Sizes take an optional K, M or G suffix (powers of 2**10).
"""

import re
import warnings

from ..coordinator.config import CACHEABLE, ActivitySpec, ExperimentConfig
from ..counters import MAX_COUNTERS
from ..errors import ExperimentLineError
from ..workloads import DEFAULT_ITERATIONS, AccessStrategy

FIELDS = ("mapping type", "strategy", "buffer size", "pool id")
GROUPS = ("main", "stress")
_UNITS = {"": 1, "k": 1 << 10, "m": 1 << 20, "g": 1 << 30}
_SIZE = re.compile(r"(\d+)\s*([kmg]?)(?:i?b)?", re.IGNORECASE)


def parse_size(text):
    m = _SIZE.fullmatch(text.strip())
    if not m:
        raise ValueError(f"malformed size {text!r}")
    return int(m.group(1)) * _UNITS[m.group(2).lower()]


def format_size(n):
    for suffix, mult in (("G", 1 << 30), ("M", 1 << 20), ("K", 1 << 10)):
        if n >= mult and n % mult == 0:
            return f"{n // mult}{suffix}"
    return str(n)


def _group(tokens, name):
    def err(msg, pos):
        return ExperimentLineError(f"{name} group, field {pos} ({FIELDS[pos - 1]}): {msg}", name, pos)

    if len(tokens) < len(FIELDS):
        pos = len(tokens) + 1
        raise err("missing", pos)
    if len(tokens) > len(FIELDS):
        raise ExperimentLineError(
            f"{name} group: expected {len(FIELDS)} fields, got {len(tokens)}", name, len(FIELDS) + 1
        )
    mapping, strategy, size, pool = tokens
    if len(mapping) != 1 or not mapping.isalpha():
        raise err(f"expected a single letter, got {mapping!r}", 1)
    if mapping != CACHEABLE:
        raise err(f"mapping type {mapping!r} is reserved; only 'c' is supported", 1)
    try:
        strat = AccessStrategy.parse(strategy)
    except Exception as exc:
        raise err(str(exc), 2) from None
    try:
        nbytes = parse_size(size)
    except ValueError as exc:
        raise err(str(exc), 3) from None
    if not pool.isdigit():
        raise err(f"expected a non-negative integer, got {pool!r}", 4)
    return ActivitySpec(mapping, strat, nbytes, int(pool))


def parse_experiment_line(text, default_iterations=DEFAULT_ITERATIONS, **overrides):
    """Parse a positional experiment line into an :class:`ExperimentConfig`.

    ``default_iterations`` applies when the line gives no iteration count.
    Keyword ``overrides`` are passed through to the config (for example
    ``counters_main`` or ``observed_core``).
    """
    groups = [g.split() for g in text.split(";")]
    if len(groups) < 2:
        raise ExperimentLineError("expected at least two ';'-separated groups (main ; stress)", "stress", 1)
    if len(groups) > 3:
        raise ExperimentLineError(f"expected at most three groups, got {len(groups)}", None, None)
    main = _group(groups[0], GROUPS[0])
    stress = _group(groups[1], GROUPS[1])
    iterations, seed = default_iterations, 0
    if len(groups) == 3:
        tail = groups[2]
        if not 1 <= len(tail) <= 2:
            raise ExperimentLineError("trailing group takes <iterations> [<seed>]", "run", len(tail))
        for pos, tok in enumerate(tail, start=1):
            if not tok.isdigit():
                what = "iterations" if pos == 1 else "seed"
                raise ExperimentLineError(f"run group, field {pos} ({what}): expected an integer, got {tok!r}",
                                          "run", pos)
        iterations = int(tail[0])
        if len(tail) == 2:
            seed = int(tail[1])
    kw = {"iterations": iterations, "seed": seed}
    kw.update(overrides)
    return ExperimentConfig(main=main, stress=stress, **kw)


def _render_group(spec):
    return f"{spec.mapping_type} {spec.strategy.value} {format_size(spec.buffer_size)} {spec.pool_id}"


def render_experiment_line(config):
    line = f"{_render_group(config.main)} ; {_render_group(config.stress)}"
    if config.iterations != DEFAULT_ITERATIONS or config.seed != 0:
        line += f" ; {config.iterations}"
        if config.seed:
            line += f" {config.seed}"
    return line


def parse_counter_sets(text, max_counters=MAX_COUNTERS):
    """Split ``"a,b;c"`` into the observed core's events and everyone else's.

    Either list may be empty. Lists longer than ``max_counters`` are cut
    to the first ``max_counters`` events with a warning.
    """
    text = text.strip()
    if not text:
        return [], []
    parts = text.split(";")
    if len(parts) != 2:
        raise ExperimentLineError(
            f"counter sets need exactly one ';' separating two lists, got {len(parts) - 1}", "counters", None
        )
    out = []
    for label, part in zip(("observed core", "other cores"), parts):
        events = [e.strip() for e in part.split(",") if e.strip()]
        if len(events) > max_counters:
            warnings.warn(
                f"{label}: {len(events)} events requested but only {max_counters} counters per core; "
                f"using {events[:max_counters]}",
                stacklevel=2,
            )
            events = events[:max_counters]
        out.append(events)
    return out[0], out[1]
