import threading
import time

import pytest

from memscope.coordinator import (
    ActivitySpec,
    ExperimentConfig,
    Role,
    ScenarioRun,
    SyncCell,
    build_scenarios,
    check,
    run_experiment,
    stop_protocol,
    validate,
)
from memscope.errors import ExperimentAborted, MemscopeError, StopTimeout, ValidationError, WorkerFailure
from memscope.pools import PoolManager
from memscope.sim import SimBackend, default_model

from .test_acceptance import DRAM_PLDRAM

SMALL = default_model().with_changes(cache={"size": 16 << 10})


def cfg(main=("r", 4096, 1), stress=("r", 4096, 1), **kw):
    kw.setdefault("iterations", 2)
    return ExperimentConfig(ActivitySpec("c", *main), ActivitySpec("c", *stress), **kw)


@pytest.fixture
def pools():
    return PoolManager.from_config(DRAM_PLDRAM)


# -- ladder -------------------------------------------------------------------

def test_ladder_for_four_cores():
    roles = [[str(r) for r in a.roles] for a in build_scenarios(4)]
    assert roles == [
        ["Main", "Idle", "Idle", "Idle"],
        ["Main", "Stress", "Idle", "Idle"],
        ["Main", "Stress", "Stress", "Idle"],
        ["Main", "Stress", "Stress", "Stress"],
    ]


def test_ladder_with_explicit_cores_and_observed():
    ladder = build_scenarios([5, 2, 9], observed=9)
    assert ladder[0].cores == (2, 5, 9)
    assert ladder[1].stressors == [2]
    assert all(a.main_core == 9 for a in ladder)


def test_ladder_errors():
    with pytest.raises(MemscopeError):
        build_scenarios(0)
    with pytest.raises(MemscopeError, match="not online"):
        build_scenarios(2, observed=3)


# -- validation ------------------------------------------------------------------

def test_valid_config_has_no_diagnostics(pools):
    assert validate(cfg(), pools, 4) == []


@pytest.mark.parametrize("config, fragment", [
    (cfg(main=("r", 512 << 20, 1)), "buffer exceeds pool"),
    (cfg(stress=("r", 4096, 9)), "no such pool 9"),
    (cfg(main=("r", 100, 1)), "multiple of 64"),
    (cfg(main=("idle", 0, 1)), "idle loop"),
    (cfg(iterations=0), "iterations"),
    (cfg(observed_core=7), "observed core 7"),
    (cfg(main=("r", 128 << 20, 1), stress=("w", 64 << 20, 1)), "worst-case"),
])
def test_validation_diagnostics(pools, config, fragment):
    diags = validate(config, pools, 4)
    assert any(fragment in d for d in diags), diags
    with pytest.raises(ValidationError):
        check(config, pools, 4)


def test_reserved_mapping_type(pools):
    config = ExperimentConfig(ActivitySpec("n", "r", 4096, 1), ActivitySpec("c", "r", 4096, 1))
    assert any("reserved" in d for d in validate(config, pools, 2))


def test_validation_allocates_nothing(pools):
    before = pools.snapshot()
    validate(cfg(main=("r", 512 << 20, 1)), pools, 4)
    assert pools.snapshot() == before


# -- running -----------------------------------------------------------------------

def test_full_ladder_on_simulator(pools):
    results = run_experiment(cfg(counters_main=("l2_access",), counters_others=("bus_access",)),
                             pools, SimBackend(SMALL))
    assert [r.stressors for r in results] == [0, 1, 2, 3]
    for r in results:
        assert r.iterations == 2 and r.lines == 64 and r.bytes == 2 * 4096
        assert set(r.counters) == {0, 1, 2, 3}
        assert set(r.counters[0]) == {"l2_access"}
        assert r.counters[0]["l2_access"] == 128
        assert "bus_access" in r.counters[1]


def test_observed_core_other_than_zero(pools):
    results = run_experiment(cfg(observed_core=2), pools, SimBackend(SMALL))
    assert all(r.roles[r.cores.index(2)] == "Main" for r in results)


def test_idle_stressors_generate_no_traffic(pools):
    backend = SimBackend(SMALL, record_trace=True)
    results = run_experiment(cfg(stress=("idle", 0, 1)), pools, backend)
    assert {rec.core for rec in backend.trace} == {0}
    assert len(results) == 4


def test_latency_main_uses_seeded_chain(pools):
    a = run_experiment(cfg(main=("l", 4096, 2), seed=3), pools, SimBackend(SMALL))
    b = run_experiment(cfg(main=("l", 4096, 2), seed=3), pools, SimBackend(SMALL))
    assert [r.iteration_elapsed for r in a] == [r.iteration_elapsed for r in b]


def test_injected_failure_aborts_and_frees(pools):
    before = pools.snapshot()
    with pytest.raises(ExperimentAborted, match="scenario 2"):
        run_experiment(cfg(), pools, SimBackend(SMALL, fail_at=(2, 1)))
    assert pools.snapshot() == before


class _LateBackend(SimBackend):
    """Pretends a stressor started after the measurement began."""

    def run_scenario(self, plan, sync):
        run = super().run_scenario(plan, sync)
        for c in sync.cores:
            sync.start_time[c] = sync.measure_start + 1
        return run


def test_containment_violation_is_fatal(pools):
    before = pools.snapshot()
    with pytest.raises(ExperimentAborted, match="started after measurement"):
        run_experiment(cfg(), pools, _LateBackend(SMALL))
    assert pools.snapshot() == before


class _BrokenBackend(SimBackend):
    def run_scenario(self, plan, sync):
        raise RuntimeError("hardware on fire")


def test_unexpected_backend_exception_is_wrapped(pools):
    with pytest.raises(ExperimentAborted, match="hardware on fire"):
        run_experiment(cfg(), pools, _BrokenBackend(SMALL))
    assert all(p.free_pages == p.total_pages for p in pools)


def test_invalid_experiment_raises_before_running(pools):
    with pytest.raises(ValidationError):
        run_experiment(cfg(main=("r", 512 << 20, 1)), pools, SimBackend(SMALL))


def test_pools_locked_during_measurement(pools):
    seen = []

    class Spy(SimBackend):
        def run_scenario(self, plan, sync):
            seen.append(all(p.locked for p in pools))
            return ScenarioRun([1], {}, {})

    with pytest.raises(ExperimentAborted):  # spy never runs the protocol
        run_experiment(cfg(), pools, Spy(SMALL))
    assert seen == [True]
    assert not any(p.locked for p in pools)


# -- sync cell -----------------------------------------------------------------------

def test_sync_protocol_with_threads():
    sync = SyncCell([0, 1, 2], 0)

    def stressor(core):
        sync.signal_started(core)
        while sync.is_running:
            time.sleep(0.001)
        sync.signal_finished(core)

    threads = [threading.Thread(target=stressor, args=(c,)) for c in (1, 2)]
    for t in threads:
        t.start()
    sync.wait_all_started(5)
    sync.begin_measurement()
    time.sleep(0.005)
    sync.end_measurement()
    stop_protocol(sync, 5)
    for t in threads:
        t.join()
    assert sync.violations() == []
    assert sync.stop_raised >= sync.measure_end


def test_stop_timeout_names_core():
    sync = SyncCell([0, 1, 2], 0)
    sync.signal_finished(1)
    with pytest.raises(StopTimeout) as exc:
        stop_protocol(sync, 0.05)
    assert exc.value.core == 2


def test_failure_unblocks_waiter():
    sync = SyncCell([0, 1], 0)
    sync.signal_failure(1, "boom")
    with pytest.raises(WorkerFailure, match="boom"):
        sync.wait_all_started(1)


def test_violations_detects_early_finish():
    sync = SyncCell([0, 1], 0, clock=iter(range(100)).__next__)
    sync.signal_started(1)
    sync.begin_measurement()
    sync.signal_finished(1)
    sync.end_measurement()
    sync.raise_stop()
    assert sync.violations() == ["core 1 finished before measurement ended"]


def test_roles_enum_strings():
    assert [str(r) for r in Role] == ["Main", "Stress", "Idle"]
