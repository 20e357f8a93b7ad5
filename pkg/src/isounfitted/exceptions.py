class IsoUnfittedError(Exception):
    pass


class NoRoot(IsoUnfittedError):
    """No step length found for the level-set correction at a point."""

    def __init__(self, element, point, message="no root in bracket"):
        self.element = element
        self.point = point
        super().__init__(f"{message} (element {element}, point {tuple(point)})")


class ResolutionError(IsoUnfittedError):
    """Mesh too coarse: nodal displacement larger than the admissible radius."""


class SingularJacobian(IsoUnfittedError):
    pass


class BoundaryConflict(IsoUnfittedError):
    """The deformation or the interface reaches the Dirichlet boundary."""


class DegenerateLevelSet(IsoUnfittedError):
    pass


class FactorizationFailure(IsoUnfittedError):
    def __init__(self, message, min_pivot=None):
        self.min_pivot = min_pivot
        super().__init__(message)


class ResidualFailure(IsoUnfittedError):
    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message)
