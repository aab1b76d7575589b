"""Exceptions and warning categories shared across the package."""


class InvalidInputError(ValueError):
    """Raised when an argument fails basic validation (non-finite, wrong sign...)."""


class DegeneratePointError(ValueError):
    """Raised when a posterior quantity is requested at a point where the
    marginal density or tail mass underflows to zero."""


class InsufficientDataError(ValueError):
    """Raised when a fitting routine is given fewer units than it needs."""


class InsufficientGroupsError(ValueError):
    """Raised when interval methods that estimate shrinkage uncertainty are
    asked to run on fewer than five groups."""


class EmpiricalNullError(RuntimeError):
    """Raised when the central log-density is not concave, so no empirical
    null can be read off; the caller should fall back to the theoretical null."""


class BoundaryFitWarning(UserWarning):
    """A fitted variance collapsed to its lower clamp during optimisation."""


class GridBoundaryWarning(UserWarning):
    """A quarter or more of the fitted mixing weight sits on an extreme grid
    point; the grid probably does not cover the data-supported effect range."""


class TotalShrinkageWarning(UserWarning):
    """The spread of the observed log variances is at or below the pure
    chi-square floor, so the prior degrees of freedom are infinite and every
    variance shrinks all the way to the common value."""
