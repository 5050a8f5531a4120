"""Exception types raised by the solver."""


class GraphError(ValueError):
    """Malformed or disconnected graph."""


class DomainMismatchError(ValueError):
    """A vertex function is not defined on exactly the graph's vertex set."""


class PhiAdmissibilityError(ValueError):
    """A nonlinearity fails the admissibility checks."""


class PhiRangeError(ArithmeticError):
    """Argument outside the range where phi can be evaluated or inverted."""


class CompatibilityError(ValueError):
    """The source term Q does not integrate to rho."""


class StiffnessError(ArithmeticError):
    """phi'(u) underflowed to zero at some vertex."""

    def __init__(self, message, vertex=None):
        super().__init__(message)
        self.vertex = vertex


class FitError(ValueError):
    """Not enough usable trajectory samples for a fit."""
