"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Non-finite or out-of-domain numeric input."""


class ConfigError(ValueError):
    """Invalid configuration or infeasible scenario."""


class StateError(RuntimeError):
    """Operation not allowed in the current state (finished episode, stale cache)."""


class ShapeError(ValueError):
    """Array dimensions do not match what the operation expects."""


class UnderfullError(RuntimeError):
    """Replay buffer holds fewer transitions than requested."""


class WeightsFormatError(ValueError):
    """Malformed, corrupted, or mismatched weights file."""
