"""Exception hierarchy shared by all modules.

The CLI maps these onto distinct exit codes (config=2, numeric=3, io=4).
"""

from __future__ import annotations


class SlungsimError(Exception):
    """Base class for all package errors."""


class ConfigError(SlungsimError):
    """Invalid scenario/configuration input (schema, invariants, counts)."""


class NumericError(SlungsimError):
    """Numerical failure: singular system, non-finite state, violated precondition."""


class LogIOError(SlungsimError):
    """Failure reading or writing log/plot artifacts."""


class SimulationAbort(SlungsimError):
    """A simulation failed mid-run; ``partial`` holds the last-good log."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial
