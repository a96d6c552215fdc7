"""Exception types raised by the estimators.

Every error derives from :class:`MCDError`, so callers that only want to know
"the fit failed" can catch a single class.
"""


class MCDError(Exception):
    """Base class for all estimator failures."""


class NotPositiveDefinite(MCDError, ValueError):
    """A matrix that must be positive definite is not."""


class ConvergenceFailure(MCDError):
    """An iterative numerical routine did not converge."""


class DomainError(MCDError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class InvalidValue(MCDError, ValueError):
    """Input contains NaN or infinite entries."""

    def __init__(self, row, message=None):
        self.row = row
        super().__init__(message or f"non-finite value in row {row}")


class DegenerateScale(MCDError):
    """The minimizing subset has zero spread (too many tied values)."""


class DegenerateColumn(DegenerateScale):
    """A data column has zero robust scale."""

    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column} has zero robust scale")


class DegenerateNorms(MCDError):
    """Row norms have zero interquartile range."""


class AllWeightsZero(MCDError):
    """Every observation received zero weight."""


class IllConditioned(MCDError):
    """A scatter estimate exceeds the condition number threshold."""

    def __init__(self, condition, message=None):
        self.condition = condition
        super().__init__(message or f"condition number {condition:.4g} too large")


class SingularCandidate(MCDError):
    """A concentration trajectory approached singularity and was abandoned."""


class BothStartsFailed(MCDError):
    """Neither initial estimate produced a usable candidate."""


class WidthMismatch(MCDError, ValueError):
    """New data does not have the dimension of the fitted model."""


class BlockTooSmall(MCDError, ValueError):
    """Partition blocks are too small to fit an MCD on."""


class NoInliers(MCDError):
    """Reweighting retained too few observations."""


class TooFewValidBlocks(MCDError):
    """More than half of the parallel blocks failed to produce a fit."""


class FitFileError(MCDError, ValueError):
    """A stored fit file is malformed or has an unsupported version."""


class ConvergenceWarning(UserWarning):
    """Concentration steps hit the iteration cap before converging."""
