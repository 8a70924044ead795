"""Exception types shared across the package.

Most subclasses derive from ValueError so that callers who do not care
about the fine distinction can still catch invalid input generically.
"""


class ConeSpdeError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(ConeSpdeError, ValueError):
    """Dimension mismatch between vectors, cones, or operator tables."""


class DomainError(ConeSpdeError, ValueError):
    """Argument outside the mathematical domain of an operation.

    Examples: negative time for a forward semigroup, resolvent parameter
    at or below the growth bound, sign entry outside {-1, 0, +1}.
    """


class ConfigError(ConeSpdeError, ValueError):
    """Invalid or inconsistent experiment configuration."""


class SamplerContractError(ConeSpdeError, RuntimeError):
    """A sampler produced a point that violates its own contract.

    This is an internal error: it indicates a bug in the sampling code,
    not bad user input.
    """


class SearchRadiusError(ConeSpdeError, RuntimeError):
    """An inner optimization hit the edge of its search interval.

    The optimum may lie outside the searched region, so the returned
    value would be unreliable.  ``suggested_radius`` is a radius to retry
    with.
    """

    def __init__(self, message: str, suggested_radius: float):
        super().__init__(message)
        self.suggested_radius = suggested_radius


class UnsupportedDimensionError(ConeSpdeError, ValueError):
    """Tensor quadrature requested in a dimension it cannot afford."""


class NumericError(ConeSpdeError, ArithmeticError):
    """A numeric probe produced non-finite intermediate values."""


class DivergenceError(ConeSpdeError, RuntimeError):
    """A simulated path crossed the overflow guard.

    Raised by single-path simulation; ensembles record the event per
    path instead of raising.
    """

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step
