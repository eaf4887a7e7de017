"""Error Hierarchy

Every error raised by the package derives from QDArrayError and carries the
process exit code the command-line front end reports for it.
"""


class QDArrayError(Exception):
    """Base class for all package errors."""
    exit_code = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


# Usage / configuration errors (exit code 2)
class ConfigurationError(QDArrayError):
    """Invalid configuration or invalid arguments."""
    exit_code = 2


class SingularInputError(ConfigurationError):
    """Input at which a model term diverges."""


class AddressingError(ConfigurationError):
    """Row or column outside the array."""


class RoutingError(ConfigurationError):
    """Gate not routed to the row under test, or a shared-bias violation."""


# Data errors (exit code 3)
class DataError(QDArrayError):
    """Malformed, missing or unsuitable data."""
    exit_code = 3


class RecordFormatError(DataError):
    """Record file could not be parsed."""


class UnsupportedVersionError(DataError):
    """Record file written with an unknown schema version."""


class DimensionalityError(DataError):
    """Record has the wrong number of swept axes."""


class InsufficientDataError(DataError):
    """Too few values for the requested statistic."""


# Fit failures (exit code 4)
class FitError(QDArrayError):
    """A fit could not be performed."""
    exit_code = 4


class NoTurnOnError(FitError):
    """Trace is flat: current range below the noise floor."""


class UnfittableDiamondError(FitError):
    """Fewer edges found than needed to fit a Coulomb diamond."""


class GeometryError(FitError):
    """Fitted diamond edges give an impossible geometry."""


class DegenerateFitError(FitError):
    """Design matrix of a fit is singular."""
