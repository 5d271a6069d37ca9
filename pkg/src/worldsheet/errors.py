"""Exception hierarchy shared by every module of the package."""


class WorldsheetError(Exception):
    """Base class for all package errors."""


class HorizonViolation(WorldsheetError):
    """A point lies on or inside the event horizon (plus safety margin)."""


class PolarSingularity(WorldsheetError):
    """The spherical chart was evaluated too close to the polar axis."""


class DegenerateMetric(WorldsheetError):
    """The induced metric is (numerically) singular."""


class NotTimelike(WorldsheetError):
    """The induced metric does not have Lorentzian signature."""


class DegenerateG11(WorldsheetError):
    """The theta-theta component of the induced metric is below its floor."""


class CoincidentCharacteristics(WorldsheetError):
    """The two characteristic speeds coincide, so (v, w) cannot be recovered."""


class AssumptionViolated(WorldsheetError):
    """Initial characteristic speeds fail the admissibility checks."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class QuadratureFailure(WorldsheetError):
    """Tabulated quadrature did not reach its tolerance."""


class GaugeViolation(WorldsheetError):
    """Data does not satisfy the flat orthonormal gauge constraints."""


class CFLViolation(WorldsheetError):
    """A requested time step exceeds the stability bound."""


class ConfigError(WorldsheetError):
    """Invalid run configuration; ``field`` names the offending entry."""

    def __init__(self, field, message):
        super().__init__(f"{field}: {message}")
        self.field = field
