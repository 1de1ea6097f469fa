"""Exception types shared across the package.

Every error raised deliberately by beamwatch derives from BeamwatchError so
the CLI can turn any of them into a one-line diagnostic and a nonzero exit.
"""


class BeamwatchError(Exception):
    """Base class for all beamwatch errors."""


class ShapeError(BeamwatchError):
    """Array dimensions inconsistent with what an operation requires."""


class ConfigError(BeamwatchError):
    """Invalid configuration value or incompatible configuration."""


class DataError(BeamwatchError):
    """Input data unusable: empty, non-overlapping, too short, etc."""


class ParseError(BeamwatchError):
    """Malformed text input; message names the offending line."""


class OrderError(BeamwatchError):
    """Input violates a required ordering (e.g. non-monotonic timestamps)."""


class RangeError(BeamwatchError):
    """Interval with end before start."""


class VersionError(BeamwatchError):
    """Serialized artifact carries an unsupported schema version."""


class NumericError(BeamwatchError):
    """Non-finite value where a finite one is required."""
