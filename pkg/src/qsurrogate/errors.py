"""Exception types shared across modules."""


class GuardError(RuntimeError):
    """A size or resource guard was exceeded (CLI exit code 3)."""


class ConfigError(ValueError):
    """Invalid or unreadable experiment configuration (CLI exit code 2)."""


class SimulationError(RuntimeError):
    """Numerical inconsistency detected during simulation."""
