"""Exception taxonomy shared across the package.

The command line maps each class to its own exit code, so keeping the
distinction between a bad configuration, bad input data and a failed
run-time check matters.
"""


class ConfigError(ValueError):
    """Scenario or parameter input is invalid or inconsistent."""


class DataError(ValueError):
    """Profile or records data is missing, malformed or incomplete."""


class VerificationError(RuntimeError):
    """An independent oracle disagreed with a solver result."""
