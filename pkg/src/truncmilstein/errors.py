"""Exception hierarchy shared by all modules."""


class SdeError(Exception):
    pass


class NumericEvaluationError(SdeError, ArithmeticError):
    """A coefficient evaluated to a non-finite value."""

    def __init__(self, what, t, y):
        self.t = t
        self.y = y
        super().__init__(f"non-finite {what} at t={t!r}, y={y!r}")


class DomainError(SdeError, ValueError):
    pass


class PolicyDomainError(DomainError):
    """Requested step falls outside what the truncation policy supports."""


class ResolutionError(SdeError, ValueError):
    """Step size does not line up with the Brownian lattice."""


class ConfigurationError(SdeError, ValueError):
    pass


class RegressionDomainError(SdeError, ValueError):
    pass


class NotApplicableError(SdeError, ValueError):
    pass
