"""Variable importance for conditional average treatment effects."""

from ._core import (
    ConfigError,
    DataError,
    Error,
    NumericError,
    __version__,
    fit,
    importance,
    run_bench,
    simulate,
    wald,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Error",
    "NumericError",
    "__version__",
    "fit",
    "importance",
    "run_bench",
    "simulate",
    "wald",
]
