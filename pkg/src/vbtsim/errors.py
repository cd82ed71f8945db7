"""Exception types raised across the toolkit.

Validation problems in configs and layouts are *returned* as
:class:`~vbtsim.core.Violation` lists; the exceptions here are for
operations that cannot produce a result at all.
"""


class VbtsError(ValueError):
    """Base class for all toolkit errors."""


class ConfigError(VbtsError):
    pass


class PitchError(VbtsError):
    """Marker pitch/spacing cannot fit the requested geometry."""


class InfeasiblePackingError(VbtsError):
    """Random marker placement ran out of its rejection-sampling budget."""


class PoseOutOfAreaError(VbtsError):
    pass


class MechanismMismatchError(VbtsError):
    pass


class TotalInternalReflection(VbtsError):
    """Raised by :func:`vbtsim.optics.refract_angle` when no refracted ray exists."""

    def __init__(self, theta: float, n_ratio: float):
        super().__init__(f"total internal reflection: sin({theta!r}) > n_ratio={n_ratio!r}")
        self.theta = theta
        self.n_ratio = n_ratio


class DimensionMismatchError(VbtsError):
    pass


class CardinalityMismatchError(VbtsError):
    pass


class DegeneratePoseError(VbtsError):
    pass


class InsufficientDataError(VbtsError):
    pass


class CapacityError(VbtsError):
    pass


class SchemaVersionError(VbtsError):
    pass
