"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: DomainError -> 1, NumericalError -> 2,
ConfigError -> 3.
"""


class MotsError(Exception):
    """Base class for all errors raised by axismots."""


class DomainError(MotsError, ValueError):
    """Input outside the mathematical domain of an operation."""


class NumericalError(MotsError, RuntimeError):
    """A numerical procedure failed (non-convergence, sign change, ...)."""


class ConvergenceError(NumericalError):
    """An iteration did not reach its tolerance.

    ``history`` carries the residual sequence when available.
    """

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = list(history or [])


class ConfigError(MotsError, ValueError):
    """Malformed or unknown configuration keys."""
