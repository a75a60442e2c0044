"""Exception hierarchy shared across the package."""


class FixedbError(Exception):
    """Base class for all package-specific errors."""


class DomainError(FixedbError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NonStudentizableError(FixedbError, ArithmeticError):
    """The lag-window variance estimate is not positive, so no studentized
    statistic or confidence interval can be formed. Distinct from
    :class:`DomainError`: the inputs were valid, the data were not."""


class KernelNotPositiveDefiniteError(FixedbError, ArithmeticError):
    """The discretized kernel has an eigenvalue below the PSD tolerance."""


class MissingTableRowError(FixedbError, KeyError):
    """A quantile table does not contain the requested level/kernel."""
