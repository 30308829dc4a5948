"""Exception types shared across the package.

Every error derives from :class:`PointImpactError`.  The command line layer maps
:class:`DataError` subclasses to exit status 2 and :class:`NumericalError`
subclasses to exit status 3.
"""


class PointImpactError(Exception):
    """Base class for all package errors."""


class DataError(PointImpactError, ValueError):
    """Invalid inputs: bad parameters, shapes, windows or file contents."""


class InvalidSpecError(DataError):
    """A process or model specification has a parameter out of range."""


class DimensionError(DataError):
    """Curves, weights or grids do not line up."""


class InsufficientDataError(DataError):
    """Too few cases for the requested operation."""


class WindowError(DataError):
    """The difference window delta is not admissible on the grid."""


class LocationError(DataError):
    """An impact location cannot be placed on the grid."""


class DataFormatError(DataError):
    """A curve file or config document cannot be parsed."""


class BudgetError(DataError):
    """An exhaustive search would exceed its enumeration budget."""


class NumericalError(PointImpactError, ArithmeticError):
    """A numerical procedure broke down."""


class NumericalDegeneracyError(NumericalError):
    """A factorization or normalization met a (near) zero pivot."""


class SingularDesignError(NumericalError):
    """A least-squares design matrix does not have full column rank."""
