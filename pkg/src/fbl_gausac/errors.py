"""Exception types shared across the package."""


class FblError(Exception):
    """Base class for all package errors."""


class DomainError(FblError, ValueError):
    """An argument lies outside the domain of the function."""


class MatrixError(FblError, ValueError):
    """A matrix argument is singular, asymmetric or not positive semidefinite."""


class SizeError(FblError, ValueError):
    """A subset-indexed structure or enumeration would exceed its guard."""


class ScheduleError(FblError, ValueError):
    """A random-access decoding schedule is malformed or infeasible."""


class ConfigError(FblError, ValueError):
    """An experiment or simulation configuration is invalid.

    ``violations`` holds every problem found, each prefixed with its key path.
    """

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))
