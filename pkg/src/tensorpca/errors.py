"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """An argument is outside the operation's domain."""


class ContractViolation(ValueError):
    """A precondition on the state of an input (normalization, basis) failed."""


class SizeError(ValueError):
    """A requested object exceeds the configured size cap."""


class DegenerateOperatorError(ValueError):
    """The requested operator would vanish identically."""


class DegenerateStartError(ArithmeticError):
    """A start state yields a zero normalization."""


class ConfigError(ValueError):
    """An experiment configuration is invalid."""


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before reaching its tolerance.

    The best iterate seen is kept on ``value`` / ``vector`` together with the
    residual and iteration count so callers can decide what to do with it.
    """

    def __init__(self, message, value=None, vector=None, residual=None, iterations=None):
        super().__init__(message)
        self.value = value
        self.vector = vector
        self.residual = residual
        self.iterations = iterations
