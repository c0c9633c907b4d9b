"""Exception hierarchy shared across the package."""


class PolarRouteError(Exception):
    """Base class for all package errors."""


class MalformedPolygonError(PolarRouteError, ValueError):
    pass


class ResolutionError(PolarRouteError, ValueError):
    pass


class InvalidCellError(PolarRouteError, ValueError):
    pass


class EnvDataError(PolarRouteError, ValueError):
    """Raised when an environmental table cannot be loaded cleanly.

    ``diagnostics`` holds one ``(row_number, message)`` pair per rejected row.
    """

    def __init__(self, message, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


class CalibrationError(PolarRouteError, ValueError):
    pass


class ModelError(PolarRouteError, ValueError):
    pass


class DisconnectedError(ModelError):
    """Start and goal are not joined by any path in the grid adjacency."""


class SolverRefusal(PolarRouteError):
    """The solver declines an instance (e.g. too many variables to enumerate)."""


class AdapterError(PolarRouteError):
    """External solver unavailable or misbehaving (distinct from infeasibility)."""


class RecoveryError(PolarRouteError):
    pass


class ConfigError(PolarRouteError, ValueError):
    pass
