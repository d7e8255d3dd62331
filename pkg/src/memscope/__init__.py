"""Heterogeneous memory characterization: pools, workloads, a multi-core
scenario coordinator, analysis, and native and simulated backends."""

__version__ = "0.1.0"
