"""Exception hierarchy shared by all modules."""


class RG2Error(Exception):
    """Base class for every error raised by the package."""


class InvalidGeometryError(RG2Error, ValueError):
    pass


class ResolutionError(RG2Error, ValueError):
    pass


class InvalidScaleError(RG2Error, ValueError):
    pass


class RepresentationError(RG2Error, ValueError):
    """A field does not match the representation of its geometry class."""


class InvalidCouplingError(RG2Error, ValueError):
    pass


class UnsupportedGeometryError(RG2Error, NotImplementedError):
    pass


class LinearSolverError(RG2Error, RuntimeError):
    pass


class StepSizeError(RG2Error, ValueError):
    pass


class PositivityError(RG2Error, RuntimeError):
    pass


class NotParabolicError(RG2Error, RuntimeError):
    pass


class IllPosedError(RG2Error, RuntimeError):
    pass


class BranchError(RG2Error, RuntimeError):
    pass


class SamplingError(RG2Error, ValueError):
    pass


class AlignmentError(RG2Error, ValueError):
    pass


class GaugeError(RG2Error, ValueError):
    pass


class ConvergenceError(RG2Error, RuntimeError):
    pass


class InsufficientDataError(RG2Error, ValueError):
    pass


class ConfigError(RG2Error, ValueError):
    """Scenario configuration failed validation; ``path`` names the field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
