"""Exception hierarchy shared by all platelab modules."""


class PlateLabError(Exception):
    """Base class for every error raised by platelab."""


class InvalidGeometryError(PlateLabError):
    """A curve, domain, or inclusion violates a geometric requirement."""


class InvalidInputError(PlateLabError, ValueError):
    """Malformed or empty numerical input."""


class SingularModuliError(PlateLabError, ZeroDivisionError):
    """Elastic moduli for which a derived quantity is undefined."""


class ResolutionError(PlateLabError):
    """The requested grid cannot resolve the geometry."""


class SolverError(PlateLabError):
    """The linear solve failed or did not reach the requested residual."""

    def __init__(self, message, residual=None, diagnostics=None):
        super().__init__(message)
        self.residual = residual
        self.diagnostics = diagnostics or {}


class UnderdeterminedError(PlateLabError):
    """Too few samples to determine a least-squares fit."""


class UndefinedRatioError(PlateLabError, ZeroDivisionError):
    """A normalized ratio has a vanishing denominator."""


class ConfigError(PlateLabError):
    """Invalid or inconsistent experiment configuration."""
