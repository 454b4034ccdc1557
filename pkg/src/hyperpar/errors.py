"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class HyperparError(Exception):
    """Base class for every error raised by the package."""


# jet arithmetic


class JetError(HyperparError, ArithmeticError):
    pass


class DivisionByZeroValue(JetError):
    pass


class DomainError(JetError, ValueError):
    pass


class OrderExceeded(JetError):
    pass


class InvalidVariable(JetError, ValueError):
    pass


# expression language


class DSLError(HyperparError, ValueError):
    pass


class DSLSyntaxError(DSLError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownIdentifier(DSLError):
    pass


class ArityError(DSLError):
    pass


class UnknownSurface(DSLError):
    pass


class BadParams(DSLError):
    pass


# geometry


class GeometryError(HyperparError):
    """A point violates one of the standing hypotheses of the theory.

    ``indices`` lists the offending batch positions when a batch of chart
    points was evaluated at once.
    """

    def __init__(self, message: str, indices=None):
        super().__init__(message)
        self.indices = [] if indices is None else [int(i) for i in indices]


class DegenerateImmersion(GeometryError):
    pass


class FlatPoint(GeometryError):
    pass


class ZeroSupport(GeometryError):
    pass


class RankViolation(GeometryError):
    pass


class SingularForm(GeometryError):
    pass


class NonSymmetricB(GeometryError):
    pass


class ComplexEigenvalues(GeometryError):
    pass


class SingularFamily(GeometryError):
    pass


class NotApplicable(GeometryError):
    pass


class ConfigError(HyperparError, ValueError):
    pass
