"""Joint active and passive beamforming for IRS-assisted mmWave downlinks."""

from .errors import (
    ConfigError, DegenerateChannelError, InvalidArgumentError, IrsError, SolverFailureError,
    TooLargeError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DegenerateChannelError", "InvalidArgumentError", "IrsError",
    "SolverFailureError", "TooLargeError", "__version__",
]
