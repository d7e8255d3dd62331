from .entries import (
    format_size,
    parse_counter_sets,
    parse_experiment_line,
    parse_size,
    render_experiment_line,
)
from .main import EXIT_INVALID, EXIT_OK, EXIT_RUNTIME, Invocation, build_parser, execute, main

__all__ = [
    "EXIT_INVALID",
    "EXIT_OK",
    "EXIT_RUNTIME",
    "Invocation",
    "build_parser",
    "execute",
    "format_size",
    "main",
    "parse_counter_sets",
    "parse_experiment_line",
    "parse_size",
    "render_experiment_line",
]
