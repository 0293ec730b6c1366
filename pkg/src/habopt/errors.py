"""Exception hierarchy shared by the solvers and the scenario runner."""


class HaboptError(Exception):
    """Base class for every error raised by this package."""


class GridMismatchError(HaboptError, ValueError):
    """A field was passed together with a grid it does not live on."""


class SingularSystemError(HaboptError):
    """The shifted operator could not be inverted to the required accuracy."""


class ConvergenceError(HaboptError):
    """An iterative solver did not reach its tolerance.

    The ``history`` attribute carries the residual (or update) norms seen so
    far, oldest first.
    """

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class PositivityError(HaboptError):
    """A density iterate lost strict positivity."""


class TimeStepError(HaboptError, ValueError):
    """The explicit reaction stability bound on the time step is violated."""


class ConfigError(HaboptError, ValueError):
    """Invalid scenario configuration. ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
