"""``memscope`` command-line interface."""

import argparse
import logging
import os
import shutil
import sys
import warnings
from dataclasses import replace
from pathlib import Path
from typing import NamedTuple

from .. import __version__
from ..analysis import read_results_csv, results_csv_text, summarize_experiment, write_iterations_csv
from ..coordinator import run_experiment, validate
from ..errors import ConfigSyntaxError, ExperimentLineError, MemscopeError, ModelError, RegionError
from ..pools import PoolManager, format_pool_status
from ..workloads import DEFAULT_ITERATIONS
from .defaults import DEFAULT_REGIONS
from .entries import parse_counter_sets, parse_experiment_line

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
RESULTS_FILE = "results.csv"
# The simulator costs ~10 us of host time per simulated line access, so a
# line without an explicit iteration count runs a single measured pass.
SIM_DEFAULT_ITERATIONS = 1

log = logging.getLogger("memscope")


class _Invalid(Exception):
    pass


def state_dir(args):
    return Path(args.state or os.environ.get("MEMSCOPE_STATE") or ".memscope")


def _read(path):
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read {path}: {exc.strerror}") from exc


def load_pools(args):
    text = _read(args.regions) if args.regions else DEFAULT_REGIONS
    return PoolManager.from_config(text)


def load_model(args):
    from ..sim import check_model, default_model, parse_model

    model = parse_model(_read(args.model)) if getattr(args, "model", None) else default_model()
    report = check_model(model)
    for w in report.warnings:
        log.warning("model: %s", w)
    return model


def make_backend(args, backend_name, config=None):
    if backend_name == "sim":
        from ..sim import SimBackend

        return SimBackend(load_model(args))
    from ..native import CoreSet, NativeBackend, PerfCounterProvider

    provider = None
    if config is not None and (config.counters_main or config.counters_others):
        provider = PerfCounterProvider()
    return NativeBackend(cores=CoreSet.detect(), counters=provider)


def load_config(args, backend_name):
    if not args.exp:
        raise _Invalid("--exp is required")
    overrides = {}
    if args.counters is not None:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            main, others = parse_counter_sets(args.counters)
        for w in caught:
            log.warning("%s", w.message)
        overrides.update(counters_main=main, counters_others=others)
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.observed is not None:
        overrides["observed_core"] = args.observed
    if args.warmup is not None:
        overrides["warmup_iterations"] = args.warmup
    default = SIM_DEFAULT_ITERATIONS if backend_name == "sim" else DEFAULT_ITERATIONS
    return parse_experiment_line(args.exp, default_iterations=default, **overrides)


# -- verbs -------------------------------------------------------------------------

def _observed_default(args, config, backend):
    # a host whose affinity mask excludes core 0 observes its first online core
    if args.observed is None and hasattr(backend, "coreset"):
        return replace(config, observed_core=backend.coreset.observed)
    return config


def cmd_pools(args):
    print(format_pool_status(load_pools(args)))
    return EXIT_OK


def cmd_validate(args):
    config = load_config(args, args.backend)
    pools = load_pools(args)
    backend = make_backend(args, args.backend)
    config = _observed_default(args, config, backend)
    diags = validate(config, pools, backend.online_cores())
    for d in diags:
        print(d, file=sys.stderr)
    if diags:
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def _run(args, backend_name):
    config = load_config(args, backend_name)
    pools = load_pools(args)
    backend = make_backend(args, backend_name, config)
    config = _observed_default(args, config, backend)
    diags = validate(config, pools, backend.online_cores())
    if diags:
        for d in diags:
            print(d, file=sys.stderr)
        return EXIT_INVALID
    results = run_experiment(config, pools, backend)
    rows = summarize_experiment(results)
    args.outcome = (results, rows)
    text = results_csv_text(rows)
    store = state_dir(args)
    store.mkdir(parents=True, exist_ok=True)
    (store / RESULTS_FILE).write_text(text)
    if args.per_iteration:
        write_iterations_csv(results, args.per_iteration)
    for r in results:
        for w in r.metadata.get("warnings", ()):
            log.info("scenario %d: %s", r.scenario_index, w)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(results)} scenario rows to {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_start(args):
    return _run(args, args.backend)


def cmd_simulate(args):
    return _run(args, "sim")


def cmd_results(args):
    path = state_dir(args) / RESULTS_FILE
    if not path.exists():
        print("no stored results", file=sys.stderr)
        return EXIT_INVALID
    text = path.read_text()
    read_results_csv(path)  # refuse to print a corrupted file
    sys.stdout.write(text)
    return EXIT_OK


def cmd_erase(args):
    store = state_dir(args)
    if store.exists():
        shutil.rmtree(store)
        print(f"erased {store}", file=sys.stderr)
    return EXIT_OK


VERBS = {
    "pools": cmd_pools,
    "validate": cmd_validate,
    "start": cmd_start,
    "results": cmd_results,
    "erase": cmd_erase,
    "simulate": cmd_simulate,
}


def build_parser():
    p = argparse.ArgumentParser(prog="memscope", description="Memory interference characterization.")
    p.add_argument("--version", action="version", version=f"memscope {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--state", help="directory holding the last results (default $MEMSCOPE_STATE or ./.memscope)")
    common.add_argument("-v", "--verbose", action="count", default=0)
    regions = argparse.ArgumentParser(add_help=False)
    regions.add_argument("--regions", metavar="FILE", help="memory region (DTS-subset) file")
    exp = argparse.ArgumentParser(add_help=False)
    exp.add_argument("--exp", metavar="LINE", help='experiment line, e.g. "c r 4M 1 ; c w 4M 1"')
    exp.add_argument("--counters", metavar="SETS", help='counter sets, e.g. "cycles,l2_access;cycles"')
    exp.add_argument("--seed", type=int)
    exp.add_argument("--observed", type=int, metavar="CORE", help="observed core (default 0)")
    exp.add_argument("--warmup", type=int, metavar="N", help="discarded warm-up iterations (default 1)")
    exp.add_argument("--model", metavar="FILE", help="simulator model file")
    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--out", metavar="CSV", help="write the results CSV here instead of stdout")
    run.add_argument("--per-iteration", metavar="CSV", help="also write per-iteration timings")

    sub = p.add_subparsers(dest="verb", required=True)
    sub.add_parser("pools", parents=[common, regions], help="print pool status")
    for name, helptext in (("validate", "check an experiment without running it"),
                           ("start", "run an experiment")):
        sp = sub.add_parser(name, parents=[common, regions, exp] + ([run] if name == "start" else []),
                            help=helptext)
        sp.add_argument("--backend", choices=("sim", "native"), default="native")
    sub.add_parser("simulate", parents=[common, regions, exp, run], help="run an experiment on the simulator")
    sub.add_parser("results", parents=[common], help="print the last stored results")
    sub.add_parser("erase", parents=[common], help="delete stored results")
    return p


class Invocation(NamedTuple):
    code: int
    results: list  # ScenarioResult objects, for start/simulate
    rows: list  # the report rows written to the CSV


def execute(argv=None):
    """Run one command and keep its in-memory outcome alongside the exit code."""
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="memscope: %(levelname)s: %(message)s")
    args.outcome = ([], [])
    try:
        code = VERBS[args.verb](args)
    except (_Invalid, ExperimentLineError, ConfigSyntaxError, RegionError, ModelError) as exc:
        print(f"memscope: {exc}", file=sys.stderr)
        code = EXIT_INVALID
    except (MemscopeError, OSError) as exc:
        print(f"memscope: {exc}", file=sys.stderr)
        code = EXIT_RUNTIME
    return Invocation(code, *args.outcome)


def main(argv=None):
    return execute(argv).code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
