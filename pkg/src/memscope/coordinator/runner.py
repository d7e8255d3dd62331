"""Experiment validation and the scenario loop."""

import logging
from dataclasses import dataclass, field

from ..errors import ExperimentAborted, MemscopeError, SyncViolation, ValidationError
from ..pools import CACHE_LINE, PoolManager
from ..workloads import (
    AccessStrategy,
    Workload,
    init_bandwidth_buffer,
    init_latency_chain,
    verify_bandwidth_buffer,
    write_latency_chain,
)
from .config import CACHEABLE, ExperimentConfig
from .plan import Activity, ScenarioPlan
from .scenarios import Role, build_scenarios
from .sync import SyncCell

log = logging.getLogger(__name__)

MAX_ITERATIONS = 1_000_000


@dataclass
class ScenarioResult:
    scenario_index: int
    cores: tuple
    roles: tuple
    iteration_elapsed: list
    bytes: int
    line_accesses: int
    lines: int
    config: ExperimentConfig
    counters: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)
    sync: dict = field(default_factory=dict)

    @property
    def stressors(self):
        return sum(1 for r in self.roles if r == Role.STRESS)

    @property
    def iterations(self):
        return len(self.iteration_elapsed)

    @property
    def bytes_per_iteration(self):
        return self.lines * CACHE_LINE

    @property
    def strategy(self):
        return self.config.main.strategy


def _pages(pool, nbytes):
    return -(-nbytes // pool.page_size)


def validate(config, pools, cores):
    """Sanity-check ``config`` against the pools and online cores.

    Returns a list of diagnostics; an empty list means the experiment can
    run. Nothing is allocated.
    """
    if not isinstance(pools, PoolManager):
        pools = PoolManager(pools)
    cores = list(range(cores)) if isinstance(cores, int) else list(cores)
    diags = []
    if config.observed_core not in cores:
        diags.append(f"observed core {config.observed_core} is not online")
    if not 1 <= config.iterations <= MAX_ITERATIONS:
        diags.append(f"iterations must be in [1, {MAX_ITERATIONS}], got {config.iterations}")
    if config.warmup_iterations < 0:
        diags.append("warm-up iterations must be >= 0")

    demand = {}
    n_stress = max(len(cores) - 1, 0)
    for role, spec, copies in (("main", config.main, 1), ("stress", config.stress, n_stress)):
        if spec.mapping_type != CACHEABLE:
            diags.append(f"{role}: mapping type {spec.mapping_type!r} is reserved; only 'c' is supported")
        if role == "main" and spec.strategy is AccessStrategy.IDLE:
            diags.append("main: the idle loop cannot be the measured activity")
        if spec.strategy is AccessStrategy.IDLE:
            continue
        if spec.buffer_size < CACHE_LINE or spec.buffer_size % CACHE_LINE:
            diags.append(f"{role}: buffer size must be a positive multiple of {CACHE_LINE} bytes, got {spec.buffer_size}")
            continue
        if spec.pool_id not in pools:
            diags.append(f"{role}: no such pool {spec.pool_id}")
            continue
        pool = pools[spec.pool_id]
        if spec.buffer_size > pool.size:
            diags.append(f"{role}: buffer exceeds pool {pool.id} ({spec.buffer_size} > {pool.size} bytes)")
            continue
        demand.setdefault(pool.id, []).append((role, copies * _pages(pool, spec.buffer_size)))

    for pid, needs in demand.items():
        pool = pools[pid]
        total = sum(n for _, n in needs)
        if total > pool.free_pages:
            who = "+".join(r for r, _ in needs)
            diags.append(
                f"{who}: worst-case buffer exceeds pool {pid} "
                f"({total} pages needed, {pool.free_pages} free)"
            )
    return diags


def check(config, pools, cores):
    diags = validate(config, pools, cores)
    if diags:
        raise ValidationError(diags)


def _workload(spec, config, buffer, seed):
    w = Workload(
        spec.strategy,
        buffer,
        config.iterations,
        nc_variant=config.nc_variant,
        word_bytes=config.word_bytes,
    )
    if spec.strategy.is_latency:
        w.chain = init_latency_chain(buffer.length // CACHE_LINE, seed)
        if buffer.backing is not None:
            write_latency_chain(buffer, w.chain, config.word_bytes)
    elif spec.strategy.is_bandwidth and buffer.backing is not None:
        init_bandwidth_buffer(buffer, config.word_bytes)
    return w


def run_scenario(config, pools, backend, assignment):
    """Allocate, run and tear down one rung of the ladder."""
    buffers = []
    try:
        activities = {}
        for core, role in zip(assignment.cores, assignment.roles):
            if role is Role.IDLE or (role is Role.STRESS and config.stress.strategy is AccessStrategy.IDLE):
                activities[core] = Activity(core, Role.IDLE if role is Role.IDLE else role)
                continue
            spec = config.main if role is Role.MAIN else config.stress
            buf = pools.alloc(spec.pool_id, spec.buffer_size)
            buffers.append(buf)
            seed = config.seed if role is Role.MAIN else config.seed + 1 + core
            activities[core] = Activity(core, role, _workload(spec, config, buf, seed))

        plan = ScenarioPlan(
            index=assignment.index,
            cores=assignment.cores,
            main_core=assignment.main_core,
            activities=activities,
            iterations=config.iterations,
            warmup_iterations=config.warmup_iterations,
            counters_main=config.counters_main,
            counters_others=config.counters_others,
            stop_timeout=config.stop_timeout,
        )
        sync = SyncCell(assignment.cores, assignment.main_core)
        pools.lock(True)
        try:
            run = backend.run_scenario(plan, sync)
        finally:
            pools.lock(False)
        problems = sync.violations()
        if problems:
            raise SyncViolation(f"scenario {assignment.index}: " + "; ".join(problems))

        main = plan.main.workload
        meta = dict(run.metadata)
        if main.strategy in (AccessStrategy.READ, AccessStrategy.NC_READ) and main.buffer.backing is not None:
            bad = verify_bandwidth_buffer(main.buffer, config.word_bytes)
            if bad:
                meta["corrupted_words"] = len(bad)
                log.warning("scenario %d: %d corrupted words in main buffer", assignment.index, len(bad))
        backend.cache_hygiene()
        iters = list(run.iteration_elapsed)
        return ScenarioResult(
            scenario_index=assignment.index,
            cores=assignment.cores,
            roles=tuple(str(r) for r in assignment.roles),
            iteration_elapsed=iters,
            bytes=len(iters) * main.bytes_per_iteration,
            line_accesses=len(iters) * main.lines,
            lines=main.lines,
            config=config,
            counters=run.counters,
            metadata=meta,
            sync={
                "measure_start": sync.measure_start,
                "measure_end": sync.measure_end,
                "stop_raised": sync.stop_raised,
                "start": dict(sync.start_time),
                "finish": dict(sync.finish_time),
            },
        )
    finally:
        for buf in buffers:
            pools.free(buf)


def run_experiment(config, pools, backend, cores=None):
    """Run the full ladder; every pool is left exactly as it was found.

    Any failure inside a scenario aborts the experiment: that scenario's
    buffers are released and :class:`ExperimentAborted` is raised, with no
    partial results returned.
    """
    if not isinstance(pools, PoolManager):
        pools = PoolManager(pools)
    cores = backend.online_cores() if cores is None else cores
    check(config, pools, cores)
    for pool in pools:
        if pool.storage is None:
            backend.attach(pool)
    results = []
    for assignment in build_scenarios(cores, config.observed_core):
        try:
            results.append(run_scenario(config, pools, backend, assignment))
        except MemscopeError as exc:
            raise ExperimentAborted(f"scenario {assignment.index} aborted: {exc}") from exc
        except Exception as exc:
            raise ExperimentAborted(f"scenario {assignment.index} aborted: {exc!r}") from exc
    return results
