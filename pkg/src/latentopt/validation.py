"""Small input-validation helpers used at public API boundaries."""

import numpy as np

from .errors import ConfigError


def as_latent(z, dim=None, name="z"):
    """Coerce to a finite 1-D float64 vector, optionally checking its dimension."""
    arr = np.ascontiguousarray(z, dtype=np.float64)
    if arr.ndim != 1:
        raise ConfigError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ConfigError(f"{name} contains non-finite coordinates")
    if dim is not None and arr.size != dim:
        raise ConfigError(f"{name} has dimension {arr.size}, expected {dim}")
    return arr


def check_positive(value, name):
    if not np.isfinite(value) or value <= 0:
        raise ConfigError(f"{name} must be a positive finite number, got {value!r}")
    return value


def check_int_at_least(value, minimum, name):
    if int(value) != value or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def check_sequence(x, alphabet=None, name="sequence"):
    """Validate a nonempty symbol string, optionally against a declared alphabet."""
    if not isinstance(x, str) or len(x) == 0:
        raise ConfigError(f"{name} must be a nonempty string")
    if alphabet is not None:
        bad = set(x) - set(alphabet)
        if bad:
            raise ConfigError(
                f"{name} contains symbols {sorted(bad)} outside alphabet {alphabet!r}"
            )
    return x
