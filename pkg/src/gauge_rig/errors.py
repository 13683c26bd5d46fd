"""Exception and warning types shared across the package."""


class GaugeRigError(Exception):
    """Base class for every error this package raises deliberately."""


class FrameworkError(GaugeRigError):
    """Invalid framework data: bad masses, lengths, edges, or input schema."""


class DegenerateConfigurationError(GaugeRigError):
    """A configuration places two joined vertices at the same point."""


class ManifoldError(GaugeRigError):
    """A state violates constraints it is required to satisfy exactly."""


class UnsolvableSystemError(GaugeRigError):
    """The rod-tension system is incompatible with its right-hand side."""

    def __init__(self, message, violation=None):
        super().__init__(message)
        self.violation = violation


class ProjectionError(GaugeRigError):
    """Constraint projection failed to converge or started too far away."""


class GaugeFixingError(GaugeRigError):
    """The requested fixing surface cannot determine the free tension rates."""


class ReductionError(GaugeRigError):
    """The framework does not have the shape the reduced model requires."""


class SerializationError(GaugeRigError):
    """A trajectory or report file could not be read or written."""


class ManifoldWarning(UserWarning):
    """A state is further from the constraint manifold than expected."""
