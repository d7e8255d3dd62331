from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memscope.errors import ConfigSyntaxError, ModelError
from memscope.sim import (
    SimCacheParams,
    check_model,
    default_model,
    effective_concurrency,
    parse_model,
    partition_layout,
    render_model,
    validate_model,
)


def test_default_model_values():
    m = default_model()
    assert m.cores.count == 4 and m.cores.mshrs == 8
    assert m.cache.size == 1 << 20 and m.cache.ways == 16 and m.cache.sets == 1024
    assert m.bus.queue_entries == 8
    assert {p: (x.idle_latency, x.mlp_cap) for p, x in m.modules.items()} == {1: (160, 5), 2: (400, 4)}
    assert validate_model(m).ok


def test_shipped_model_file_is_the_default(configs):
    assert parse_model((configs / "default_model.txt").read_text()) == default_model()


def test_parse_suffixes_and_infinity():
    m = parse_model("cache.size = 2M\nbus.queue_entries = inf\ncores = 2\n")
    assert m.cache.size == 2 << 20 and m.bus.queue_entries is None and m.cores.count == 2
    assert m.modules == default_model().modules


def test_modules_replace_base_set():
    m = parse_model("module.3.latency_ns = 90\nmodule.3.mlp_cap = 2\n")
    assert list(m.modules) == [3] and m.modules[3].name == "module3"


def test_parse_errors_carry_line_numbers():
    with pytest.raises(ConfigSyntaxError) as exc:
        parse_model("cores = 4\nbogus = 1\n")
    assert exc.value.line == 2
    with pytest.raises(ConfigSyntaxError, match="bad value"):
        parse_model("cores = four")
    with pytest.raises(ConfigSyntaxError, match="lacks"):
        parse_model("module.1.latency_ns = 10")


@pytest.mark.parametrize("changes, fragment", [
    ({"cache": {"hit_port_slots": 0}}, "hit_port_slots"),
    ({"cache": {"size": 1000}}, "whole number"),
    ({"bus": {"queue_entries": 0}}, "queue_entries"),
    ({"cores": {"mshrs": 0}}, "mshrs"),
    ({"modules": {1: {"idle_latency": 0}}}, "idle_latency"),
    ({"cache": {"partition": {0: Fraction(1, 3)}}}, "whole number of sets"),
    ({"cache": {"partition": {0: Fraction(3, 4), 1: Fraction(1, 2)}}}, "more than"),
    ({"cache": {"partition": {7: Fraction(1, 2)}}}, "names core 7"),
])
def test_invalid_models(changes, fragment):
    m = default_model().with_changes(**changes)
    report = validate_model(m)
    assert any(fragment in e for e in report.errors), report.errors
    with pytest.raises(ModelError):
        check_model(m)


def test_small_queue_is_only_a_warning():
    report = validate_model(default_model().with_changes(bus={"queue_entries": 2}))
    assert report.ok and report.warnings


def test_partition_layout_shares_equal_fractions():
    cache = SimCacheParams(partition={0: Fraction(1, 2), 1: Fraction(1, 4), 2: Fraction(1, 4)})
    assert partition_layout(cache, 4) == {0: (0, 512), 1: (512, 256), 2: (512, 256), 3: (0, 1024)}


def test_effective_concurrency():
    m = default_model()
    assert effective_concurrency(m, 1) == 5
    assert effective_concurrency(m.with_changes(bus={"queue_entries": 3}), 1) == 3
    assert effective_concurrency(m.with_changes(cores={"mshrs": 2}), 2) == 2


@settings(max_examples=50, deadline=None)
@given(
    cores=st.integers(1, 8),
    mshrs=st.integers(1, 16),
    queue=st.one_of(st.none(), st.integers(1, 32)),
    ways=st.sampled_from([1, 4, 16]),
    sets=st.sampled_from([16, 64, 1024]),
    slots=st.integers(1, 4),
    lat=st.integers(1, 1000),
    cap=st.integers(1, 8),
    part=st.sampled_from([None, Fraction(1, 2), Fraction(1, 4)]),
)
def test_model_file_round_trip(cores, mshrs, queue, ways, sets, slots, lat, cap, part):
    m = default_model().with_changes(
        cores={"count": cores, "mshrs": mshrs},
        bus={"queue_entries": queue},
        cache={"ways": ways, "size": ways * sets * 64, "hit_port_slots": slots,
               "partition": {0: part} if part else {}},
        modules={1: {"idle_latency": lat, "mlp_cap": cap}},
    )
    assert parse_model(render_model(m)) == m
