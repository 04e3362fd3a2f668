"""Exception hierarchy shared by all modules."""


class IrsError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(IrsError, ValueError):
    """An argument is outside its documented domain."""


class DegenerateChannelError(IrsError):
    """The effective channel is identically zero, so MRT is undefined."""


class SolverFailureError(IrsError):
    """An iterative solver did not converge.

    Attributes:
        diagnostics: free-form dict with the solver state at failure.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class TooLargeError(IrsError):
    """An exhaustive oracle was asked for a search space beyond its guard."""


class ConfigError(IrsError):
    """Invalid experiment configuration.

    Attributes:
        field: dotted name (or ``line N``) of the offending entry.
    """

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
