from .backend import SimBackend, SimReport, simulate
from .model import (
    ModelReport,
    SimBusParams,
    SimCacheParams,
    SimCoreParams,
    SimModuleParams,
    SimSystemModel,
    check_model,
    default_model,
    effective_concurrency,
    parse_model,
    partition_layout,
    render_model,
    validate_model,
)
from .trace import TransactionTrace, TraceRecord

__all__ = [
    "SimBackend",
    "SimReport",
    "simulate",
    "ModelReport",
    "SimBusParams",
    "SimCacheParams",
    "SimCoreParams",
    "SimModuleParams",
    "SimSystemModel",
    "check_model",
    "default_model",
    "effective_concurrency",
    "partition_layout",
    "parse_model",
    "render_model",
    "validate_model",
    "TransactionTrace",
    "TraceRecord",
]
