"""Exception hierarchy.

Validation problems (bad specs, bad configs) derive from :class:`ValidationError`;
everything that goes wrong while computing derives from :class:`NumericalError`.
The CLI maps the two families to exit codes 1 and 2.
"""
from __future__ import annotations


class NeumannHoleError(Exception):
    pass


class ValidationError(NeumannHoleError):
    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


class InvalidSpecError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class NumericalError(NeumannHoleError):
    pass


class GeometryError(NumericalError):
    pass


class ResolutionError(NumericalError):
    pass


class AssemblyError(NumericalError):
    pass


class LinearSolveError(NumericalError):
    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class ConvergenceError(NumericalError):
    def __init__(self, message: str, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class DistanceError(NumericalError):
    """Hausdorff distance requested for an empty set."""


class DegenerateInputError(NumericalError):
    pass


class PropertyStarViolation(NumericalError):
    pass


class MeasureError(NumericalError):
    pass


class CatalogError(ValidationError):
    pass


class LogDomainError(NumericalError):
    """Rate fit asked to take the logarithm of a nonpositive value."""
