"""Exception types shared across the package."""


class DriveAdError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(DriveAdError):
    """Bad or inconsistent run/generator configuration."""


class DataError(DriveAdError):
    """Malformed input data (CSV rows, labels, stores)."""


class NumericError(DriveAdError):
    """Numerical failure: non-finite values, divergence, singular fits."""


class NotPositiveDefiniteError(NumericError):
    """A Cholesky pivot was <= 0; the caller must regularize the matrix."""


class SequenceTooShortError(DriveAdError):
    """Sequence shorter than the convolution kernel it is fed to."""


class CheckpointError(DriveAdError):
    """Unreadable, truncated, or shape-incompatible checkpoint file."""
