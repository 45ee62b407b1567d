"""Constants and size guards for modcsp."""

import os

from modcsp.exceptions import ConfigurationError

EQUALITY = "="
CONSTANT_PREFIX = "C_"
ENDOMORPHISM_RELATION = "Q_end"
SORT_RELATION_PREFIX = "sort:"

DEFAULT_SEED = 20240917
REPORT_SCHEMA_VERSION = 1

GUARD_ENV_VAR = "MODCSP_GUARD"
FIXTURE_PREFIX = "fixture:"

# Exit codes (64 and 65 follow sysexits.h)
EXIT_OK = 0
EXIT_PRECONDITION = 1
EXIT_ORACLE_MISMATCH = 2
EXIT_USAGE = 64
EXIT_DATAERR = 65

# Guard defaults (desk scale)
MAX_INDICATOR_CONSTRAINTS = 200_000
MAX_MOBIUS_UNIVERSE = 8
MAX_ENDOMORPHISMS = 50_000
MAX_BOUND_VARIABLES = 12
MAX_PROTECTED_CARRIER = 8
MAX_SEARCH_NODES = 2_000_000


def guard_limit(default: int) -> int | None:
    """Return the effective value of a size guard.

    Reads ``MODCSP_GUARD``: unset keeps ``default``, a positive integer
    multiplies it, ``0`` or ``off`` disables the guard entirely.

    Args:
        default: Built-in limit for this guard

    Returns:
        The limit to enforce, or None when guards are disabled

    Raises:
        ConfigurationError: If the environment variable is not understood
    """
    raw = os.environ.get(GUARD_ENV_VAR)
    if raw is None or raw.strip() == "":
        return default
    value = raw.strip().lower()
    if value in ("off", "0"):
        return None
    try:
        factor = int(value)
    except ValueError as e:
        raise ConfigurationError(
            f"{GUARD_ENV_VAR} must be a positive integer or 'off', got {raw!r}"
        ) from e
    if factor < 0:
        raise ConfigurationError(f"{GUARD_ENV_VAR} must not be negative, got {raw!r}")
    return default * factor
