"""slungsim: hybrid-dynamics simulation of aerial payload transport.

Single or multiple quadrotors carry a point-mass or rigid-body payload via
suspended cables (with full slack/taut hybrid dynamics and inelastic
collision resets) or via rigid links (simulated as one structure).
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    LogIOError,
    NumericError,
    SimulationAbort,
    SlungsimError,
)

__all__ = [
    "__version__",
    "ConfigError",
    "LogIOError",
    "NumericError",
    "SimulationAbort",
    "SlungsimError",
]
