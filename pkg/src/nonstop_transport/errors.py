"""Exception hierarchy shared by the control stack."""


class TransportError(Exception):
    """Base class for all errors raised by this package."""


class DegenerateDirectionError(TransportError):
    """Carrier coincides with its attachment point; the cable direction is undefined."""


class PreconditionError(TransportError, ValueError):
    """An input violates a documented precondition."""


class AllocationSingularityError(TransportError):
    """The grasp matrix lost full row rank."""


class BasisDimensionError(TransportError):
    """Nullspace dimension changed between consecutive control instants."""


class LowTensionError(TransportError):
    def __init__(self, carrier, tension, floor):
        self.carrier = carrier
        self.tension = tension
        self.floor = floor
        super().__init__(
            f"carrier {carrier}: desired tension {tension:.4g} N below floor {floor:.4g} N")


class ConfigError(TransportError, ValueError):
    """Scenario configuration could not be parsed or validated."""
