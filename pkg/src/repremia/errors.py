"""Exception hierarchy shared by every module."""


class ReinsuranceError(Exception):
    """Base class for all package errors."""


class DomainError(ReinsuranceError, ValueError):
    """An argument lies outside the domain of the operation."""


class InfeasibleError(ReinsuranceError, ValueError):
    """A contract layout violates one of its feasibility constraints."""


class SingularityError(ReinsuranceError, ArithmeticError):
    """A formula hits a zero denominator (flat survival function)."""


class ConstructionError(ReinsuranceError, RuntimeError):
    """A mean-matching bracket failed while building an improved contract."""


class ConfigError(ReinsuranceError, ValueError):
    """A scenario file is malformed or violates a model invariant."""
