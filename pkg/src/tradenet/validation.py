"""Small input-validation helpers used across the package.

Each helper raises the narrowest exception from :mod:`tradenet.errors`
with a message that names the offending argument, so validation failures
read the same everywhere.
"""

import numpy as np

from .errors import ConfigError, DimensionError, NumericError


def check_positive_int(value, name):
    """Validate that ``value`` is an integer >= 1 and return it as ``int``."""
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    if value < 1:
        raise ConfigError(f"{name} must be >= 1, got {value}")
    return int(value)


def check_nonnegative(value, name):
    """Validate that ``value`` is a finite real >= 0 and return it as ``float``."""
    value = float(value)
    if not np.isfinite(value) or value < 0:
        raise ConfigError(f"{name} must be a finite nonnegative real, got {value}")
    return value


def check_probability(value, name):
    """Validate that ``value`` lies in [0, 1] and return it as ``float``."""
    value = float(value)
    if not np.isfinite(value) or not 0.0 <= value <= 1.0:
        raise ConfigError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_unit_open(value, name):
    """Validate that ``value`` lies strictly inside (0, 1)."""
    value = float(value)
    if not np.isfinite(value) or not 0.0 < value < 1.0:
        raise ConfigError(f"{name} must lie strictly inside (0, 1), got {value}")
    return value


def check_vector(value, dim, name):
    """Coerce ``value`` to a finite 1-d float array of length ``dim``."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 1:
        raise DimensionError(f"{name} must be a 1-d vector, got shape {arr.shape}")
    if arr.shape[0] != dim:
        raise DimensionError(f"{name} has dimension {arr.shape[0]}, expected {dim}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite entries")
    return arr


def check_finite(array, name):
    """Raise :class:`NumericError` if ``array`` has non-finite entries."""
    arr = np.asarray(array, dtype=float)
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr.reshape(-1)))[0])
        raise NumericError(f"{name} contains a non-finite value at flat index {bad}")
    return arr


def check_same_length(a, b, name_a, name_b):
    """Validate that two sequences have equal nonzero length."""
    if len(a) != len(b):
        raise ConfigError(f"{name_a} and {name_b} must have equal length, got {len(a)} and {len(b)}")
    if len(a) == 0:
        raise ConfigError(f"{name_a} and {name_b} must be nonempty")
