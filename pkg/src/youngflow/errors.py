"""Exception types raised across the package."""


class YoungFlowError(Exception):
    """Base class for all package errors."""


class DomainError(YoungFlowError, ValueError):
    """An argument lies outside the domain where an operation is defined."""


class IterationError(YoungFlowError, RuntimeError):
    """A fixed-point iteration failed to converge within its budget."""


class DegeneracyError(YoungFlowError, ArithmeticError):
    """A flow matrix became numerically singular."""


class GenerationError(YoungFlowError, RuntimeError):
    """Random path generation failed (e.g. a covariance lost definiteness)."""


class ConfigError(YoungFlowError, ValueError):
    """An experiment configuration failed validation.

    ``problems`` lists every violated field, not only the first one.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.problems))
