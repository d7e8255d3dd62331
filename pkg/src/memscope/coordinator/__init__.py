from .config import CACHEABLE, ActivitySpec, ExperimentConfig
from .plan import Activity, Backend, ScenarioPlan, ScenarioRun
from .runner import ScenarioResult, check, run_experiment, run_scenario, validate
from .scenarios import Role, ScenarioAssignment, build_scenarios
from .sync import DEFAULT_STOP_TIMEOUT, SyncCell, stop_protocol

__all__ = [
    "CACHEABLE",
    "ActivitySpec",
    "ExperimentConfig",
    "Activity",
    "Backend",
    "ScenarioPlan",
    "ScenarioRun",
    "ScenarioResult",
    "check",
    "run_experiment",
    "run_scenario",
    "validate",
    "Role",
    "ScenarioAssignment",
    "build_scenarios",
    "DEFAULT_STOP_TIMEOUT",
    "SyncCell",
    "stop_protocol",
]
