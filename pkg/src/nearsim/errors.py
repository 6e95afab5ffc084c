"""Exception hierarchy.

Two broad families matter to callers: domain errors (bad inputs or requests
for objects that provably do not exist) and numeric errors (a computation ran
but could not meet its accuracy or feasibility contract).  The CLI maps these
to distinct exit codes.
"""


class NearsimError(Exception):
    """Base class for every error raised by this package."""


class DomainError(NearsimError):
    """Invalid argument or a request outside the mathematical domain."""


class InvalidProbabilityError(DomainError):
    """A probability argument outside (0, 1)."""


class UnsupportedDimensionError(DomainError):
    """Dimension K outside the supported range (permanent cost grows as K!)."""


class NoSimilarTestError(DomainError):
    """An exact similar test does not exist at the requested level.

    Raised when 1/alpha is not an integer: the step construction cannot then
    terminate at the normal critical value.
    """


class UndefinedStatisticError(DomainError):
    """A test statistic is undefined at the given point (e.g. 0/0)."""


class SingularDesignError(DomainError):
    """Regression design matrix is rank deficient."""


class MalformedBoundaryFileError(DomainError):
    """Boundary file could not be parsed."""


class BoundaryInvariantError(DomainError):
    """Boundary data violates a structural invariant (ordering, bounds)."""


class NumericError(NearsimError):
    """A computation failed to meet its numeric contract."""


class AccuracyError(NumericError):
    """Quadrature did not converge to the requested tolerance.

    Carries the best available estimate and its error bound so callers can
    decide whether the achieved accuracy is still useful.
    """

    def __init__(self, message, estimate=None, error_estimate=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_estimate = error_estimate


class OptimizationError(NumericError):
    """Constrained search failed; carries the best feasible iterate found."""

    def __init__(self, message, best_iterate=None):
        super().__init__(message)
        self.best_iterate = best_iterate


class InfeasibleConstraintsError(NumericError):
    """No selection satisfies the similarity/size constraints as posed."""
