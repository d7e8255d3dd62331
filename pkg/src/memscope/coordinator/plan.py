"""What the coordinator hands a backend for one scenario, and what comes back."""

from dataclasses import dataclass, field
from typing import Optional, Protocol

from ..workloads import Workload, WorkloadOutcome
from .scenarios import Role


@dataclass
class Activity:
    core: int
    role: Role
    workload: Optional[Workload] = None


@dataclass
class ScenarioPlan:
    index: int
    cores: tuple
    main_core: int
    activities: dict
    iterations: int
    warmup_iterations: int = 1
    counters_main: tuple = ()
    counters_others: tuple = ()
    stop_timeout: float = 30.0

    @property
    def main(self):
        return self.activities[self.main_core]

    def events_for(self, core):
        return self.counters_main if core == self.main_core else self.counters_others


@dataclass
class ScenarioRun:
    iteration_elapsed: list
    counters: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)


class Backend(Protocol):
    name: str

    def online_cores(self) -> list: ...

    def attach(self, pool) -> None: ...

    def run_workload(self, workload: Workload) -> WorkloadOutcome: ...

    def run_idle(self, stop_signal) -> WorkloadOutcome: ...

    def run_scenario(self, plan: ScenarioPlan, sync) -> ScenarioRun: ...

    def cache_hygiene(self) -> None: ...
