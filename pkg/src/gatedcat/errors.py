"""Exception taxonomy shared across the package.

The CLI maps these onto distinct exit codes, so library code should raise
the most specific class that applies.
"""


class ConfigError(ValueError):
    """Malformed or inconsistent configuration input."""


class PhysicsError(ValueError):
    """A physical precondition is violated (grid coverage, truncation, ...)."""


class GridCoverageError(PhysicsError):
    """Time grid too narrow for the requested mode or jitter support."""


class TruncationError(PhysicsError):
    """Photon-number truncation inadequate for the requested state."""


class CalibrationRangeError(PhysicsError):
    """Requested calibration target is outside the reachable bracket."""


class InsufficientDataError(PhysicsError):
    """Not enough records/samples for the requested estimation step."""


class ModeWidthWarning(UserWarning):
    """Width estimate taken on a multi-peaked profile."""
