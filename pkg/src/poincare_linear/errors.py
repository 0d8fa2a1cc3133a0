"""Exception hierarchy shared by the library and the CLI."""


class PoincareLinearError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class UsageError(PoincareLinearError, ValueError):
    """Invalid arguments: bad shapes, out-of-range parameters, empty inputs."""

    exit_code = 2


class DataValidationError(PoincareLinearError, ValueError):
    """A dataset or point failed validation (malformed row, outside the ball, ...)."""

    exit_code = 3


class GenerationError(DataValidationError):
    """Synthetic data could not be generated with the requested parameters."""


class ConvergenceError(PoincareLinearError, RuntimeError):
    """A learner did not converge within its iteration caps."""

    exit_code = 4
