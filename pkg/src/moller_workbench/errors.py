"""Exception hierarchy for the workbench."""


class WorkbenchError(Exception):
    """Base class for all workbench errors."""

    pass


class ConfigurationError(WorkbenchError, ValueError):
    """Raised when a configuration or construction precondition is violated."""

    pass


class ShapeError(WorkbenchError, ValueError):
    """Raised when an array does not match the grid or fiber layout."""

    pass


class BundleMismatchError(WorkbenchError, TypeError):
    """Raised when a section or functional is used with the wrong bundle tag."""

    pass


class CausalDomainError(WorkbenchError):
    """Raised when a source touches a temporal boundary or its cone wraps."""

    pass


class BoundaryError(WorkbenchError):
    """Raised when a derivative order cannot be supported by the grid."""

    pass


class OracleCapError(WorkbenchError):
    """Raised when a dense materialization exceeds the configured cap."""

    pass


class DegreeOverflowError(WorkbenchError):
    """Raised when a functional product would exceed the degree cap."""

    pass


class NumericFailure(WorkbenchError):
    """Raised when a linear-algebra step fails or produces non-finite output."""

    pass
