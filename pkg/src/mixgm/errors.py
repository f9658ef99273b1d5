"""Exception types shared across the package.

The CLI maps these onto exit codes: :class:`DataError` -> 2,
:class:`NumericalError` -> 3.
"""


class DataError(ValueError):
    """Input data or schema is malformed or inconsistent."""


class NumericalError(RuntimeError):
    """A numerical routine failed (divergence, degenerate system, ...)."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace
