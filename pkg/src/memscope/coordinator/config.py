from dataclasses import dataclass, field

from ..workloads import DEFAULT_ITERATIONS, DEFAULT_WORD_BYTES, AccessStrategy, NcVariant

CACHEABLE = "c"


@dataclass(frozen=True)
class ActivitySpec:
    mapping_type: str
    strategy: AccessStrategy
    buffer_size: int
    pool_id: int

    def __post_init__(self):
        object.__setattr__(self, "strategy", AccessStrategy.parse(self.strategy))


@dataclass(frozen=True)
class ExperimentConfig:
    main: ActivitySpec
    stress: ActivitySpec
    iterations: int = DEFAULT_ITERATIONS
    counters_main: tuple = ()
    counters_others: tuple = ()
    seed: int = 0
    observed_core: int = 0
    warmup_iterations: int = 1
    nc_variant: NcVariant = NcVariant.DCADD
    word_bytes: int = DEFAULT_WORD_BYTES
    stop_timeout: float = 30.0
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "counters_main", tuple(self.counters_main))
        object.__setattr__(self, "counters_others", tuple(self.counters_others))
        object.__setattr__(self, "nc_variant", NcVariant(self.nc_variant))
