"""Exception types shared across the package."""


class TailselError(Exception):
    """Base class for all package errors."""


class DomainError(TailselError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class UndefinedStatisticError(TailselError, ValueError):
    """A statistic is undefined for the given data (e.g. a constant margin)."""


class QuadratureError(TailselError, RuntimeError):
    """Numerical integration failed to reach the requested tolerance."""


class OptimizationError(TailselError, RuntimeError):
    """An optimizer could not find any finite objective value."""


class DataError(TailselError, ValueError):
    """Input data violates a structural requirement."""


class FeatureMismatchError(TailselError, ValueError):
    """Columns passed at prediction time differ from those used for training."""
