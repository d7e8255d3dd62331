import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from memscope.analysis import read_results_csv
from memscope.cli import (
    EXIT_INVALID,
    EXIT_OK,
    EXIT_RUNTIME,
    execute,
    format_size,
    main,
    parse_counter_sets,
    parse_experiment_line,
    parse_size,
    render_experiment_line,
)
from memscope.cli.defaults import DEFAULT_REGIONS
from memscope.coordinator import ActivitySpec, ExperimentConfig
from memscope.errors import ExperimentLineError
from memscope.pools import parse_region_config


def test_homogeneous_example():
    c = parse_experiment_line("c r 4M 2 ; c w 4M 2")
    assert c.main == ActivitySpec("c", "r", 4 << 20, 2)
    assert c.stress == ActivitySpec("c", "w", 4 << 20, 2)
    assert c.iterations == 500 and c.seed == 0


def test_heterogeneous_example():
    c = parse_experiment_line("c l 4M 2 ; c r 4M 3")
    assert (c.main.strategy.value, c.main.pool_id, c.stress.pool_id) == ("l", 2, 3)


def test_iterations_and_seed():
    c = parse_experiment_line("c r 64K 1 ; c idle 0 1 ; 7 42")
    assert (c.iterations, c.seed, c.stress.strategy.value) == (7, 42, "idle")


@pytest.mark.parametrize("line, group, pos", [
    ("c r 4M ; c w 4M 1", "main", 4),
    ("c r 4M 1 ; c w", "stress", 3),
    ("c q 4M 1 ; c w 4M 1", "main", 2),
    ("c r 4X 1 ; c w 4M 1", "main", 3),
    ("c r 4M 1 ; c w 4M one", "stress", 4),
    ("n r 4M 1 ; c w 4M 1", "main", 1),
    ("c r 4M 1 ; c w 4M 1 ; x", "run", 1),
])
def test_positional_errors(line, group, pos):
    with pytest.raises(ExperimentLineError) as exc:
        parse_experiment_line(line)
    assert (exc.value.group, exc.value.position) == (group, pos)
    assert f"field {pos}" in str(exc.value)


def test_missing_stress_group():
    with pytest.raises(ExperimentLineError):
        parse_experiment_line("c r 4M 1")


def test_sizes():
    assert [parse_size(s) for s in ("64", "1K", "4M", "2G", "8KiB", "16mb")] == [
        64, 1024, 4 << 20, 2 << 30, 8192, 16 << 20]
    assert [format_size(n) for n in (64, 1024, 3 << 20, 1536)] == ["64", "1K", "3M", "1536"]


@settings(max_examples=100, deadline=None)
@given(
    ms=st.sampled_from(list("rwlsxmy")), ss=st.sampled_from(list("rwlsxmy") + ["idle"]),
    mb=st.integers(1, 1 << 20).map(lambda n: n * 64), sb=st.integers(1, 1 << 20).map(lambda n: n * 64),
    mp=st.integers(0, 99), sp=st.integers(0, 99),
    iters=st.integers(1, 10_000), seed=st.integers(0, 2**31),
)
def test_render_parse_round_trip(ms, ss, mb, sb, mp, sp, iters, seed):
    c = ExperimentConfig(ActivitySpec("c", ms, mb, mp), ActivitySpec("c", ss, sb, sp), iterations=iters, seed=seed)
    assert parse_experiment_line(render_experiment_line(c)) == c


@pytest.mark.parametrize("line", ["c r 4M 2 ; c w 4M 2", "c l 4M 2 ; c r 4M 3", "c y 1G 1 ; c x 8K 2 ; 12 3"])
def test_grammar_examples_round_trip(line):
    c = parse_experiment_line(line)
    assert parse_experiment_line(render_experiment_line(c)) == c


def test_counter_sets():
    assert parse_counter_sets("cycles,l2_access;cycles") == (["cycles", "l2_access"], ["cycles"])
    assert parse_counter_sets(";") == ([], [])
    assert parse_counter_sets("") == ([], [])
    with pytest.raises(ExperimentLineError):
        parse_counter_sets("cycles")


def test_counter_sets_truncate_to_six():
    with pytest.warns(UserWarning, match="only 6"):
        main_set, _ = parse_counter_sets("a,b,c,d,e,f,g;")
    assert main_set == list("abcdef")


def test_shipped_region_file_is_the_default(configs):
    assert (configs / "default_regions.dts").read_text() == DEFAULT_REGIONS
    assert [r.base for r in parse_region_config(DEFAULT_REGIONS)] == [0x10000000, 0x400000000]


# -- dispatch ---------------------------------------------------------------------

@pytest.fixture
def state(tmp_path):
    return ["--state", str(tmp_path / "state")]


def test_pools_verb(capsys, state):
    assert main(["pools"] + state) == EXIT_OK
    assert capsys.readouterr().out.splitlines() == [
        "id=1 size=268435456 base=0x10000000 free=65536",
        "id=2 size=268435456 base=0x400000000 free=65536",
    ]


def test_pools_from_file(capsys, configs, state):
    assert main(["pools", "--regions", str(configs / "bram_dram.dts")] + state) == EXIT_OK
    assert capsys.readouterr().out.startswith("id=1 size=1048576 base=0xa0000000")


def test_validate_verb(capsys, state):
    assert main(["validate", "--backend", "sim", "--exp", "c r 4M 1 ; c w 4M 1"] + state) == EXIT_OK
    assert main(["validate", "--backend", "sim", "--exp", "c r 512M 1 ; c w 4M 1"] + state) == EXIT_INVALID
    assert "buffer exceeds pool" in capsys.readouterr().err


def test_bad_line_is_a_validation_failure(capsys, state):
    assert main(["validate", "--exp", "c r 4M ; c w 4M 1"] + state) == EXIT_INVALID
    assert "field 4" in capsys.readouterr().err


def test_missing_file_is_a_runtime_failure(state):
    assert main(["pools", "--regions", "/nonexistent.dts"] + state) == EXIT_RUNTIME


def test_start_results_erase(tmp_path, capsys, state):
    out = tmp_path / "o.csv"
    inv = execute(["start", "--backend", "sim", "--exp", "c r 64K 1 ; c r 64K 1 ; 2", "--out", str(out),
                   "--counters", "l2_access;", "--per-iteration", str(tmp_path / "it.csv")] + state)
    assert inv.code == EXIT_OK and len(inv.rows) == 4
    assert "l2_access_core0" in read_results_csv(out)[0]
    capsys.readouterr()
    assert main(["results"] + state) == EXIT_OK
    assert capsys.readouterr().out == out.read_text()
    assert main(["erase"] + state) == EXIT_OK
    assert main(["erase"] + state) == EXIT_OK
    assert main(["results"] + state) == EXIT_INVALID


def test_simulate_with_model_file(tmp_path, capsys, state):
    model = tmp_path / "m.txt"
    model.write_text("cores = 2\n")
    assert main(["simulate", "--model", str(model), "--exp", "c l 16K 1 ; c r 16K 2"] + state) == EXIT_OK
    rows = read_results_csv(__import__("io").StringIO(capsys.readouterr().out))
    assert len(rows) == 2 and rows[0]["lat_med_ns"] > 0


def test_bad_model_file(tmp_path, state):
    model = tmp_path / "m.txt"
    model.write_text("cache.hit_port_slots = 0\n")
    assert main(["simulate", "--model", str(model), "--exp", "c r 4K 1 ; c r 4K 1"] + state) == EXIT_INVALID


def test_native_start_single_core(state, capsys):
    assert main(["start", "--exp", "c r 64K 1 ; c r 64K 1 ; 2"] + state) == EXIT_OK
    assert capsys.readouterr().out.startswith("scenario,")


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "memscope", "pools", "--state", str(tmp_path)],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0 and "id=2" in proc.stdout
