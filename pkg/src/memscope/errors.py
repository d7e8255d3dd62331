"""Exception hierarchy shared by every memscope layer."""


class MemscopeError(Exception):
    """Base class for all memscope failures."""


class ConfigSyntaxError(MemscopeError):
    """A configuration document could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RegionError(MemscopeError):
    """A memory region description is unusable."""


class AllocationError(MemscopeError):
    """A pool could not satisfy (or release) an allocation."""


class WorkloadError(MemscopeError):
    """A workload was asked to do something its contract forbids."""


class ModelError(MemscopeError):
    """The simulator model failed validation."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


class ValidationError(MemscopeError):
    """An experiment configuration failed its sanity checks."""

    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


class ExperimentLineError(MemscopeError):
    """A positional experiment string is malformed."""

    def __init__(self, message, group=None, position=None):
        self.group = group
        self.position = position
        super().__init__(message)


class PinningError(MemscopeError):
    """A worker could not be placed on the requested core."""


class WorkerFailure(MemscopeError):
    """A worker (native thread or simulated core) died mid-scenario."""

    def __init__(self, core, reason):
        self.core = core
        super().__init__(f"worker on core {core} failed: {reason}")


class StopTimeout(MemscopeError):
    """A non-main worker did not acknowledge the stop signal in time."""

    def __init__(self, core, timeout):
        self.core = core
        self.timeout = timeout
        super().__init__(f"core {core} did not finish within {timeout} s")


class SyncViolation(MemscopeError):
    """The measured interval escaped the stressor activity window."""


class ExperimentAborted(MemscopeError):
    """An experiment stopped early; partial results were discarded."""


class AnalysisError(MemscopeError):
    """Derived metrics requested from unusable inputs."""
