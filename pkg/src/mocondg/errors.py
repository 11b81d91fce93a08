"""Exception types raised across the package."""


class MocondgError(Exception):
    """Base class for package errors."""


class OutOfDomain(MocondgError, ValueError):
    """A point lies outside the problem's box beyond tolerance."""


class UnknownProblem(MocondgError, KeyError):
    """No registry entry has the requested name."""


class DimensionMismatch(MocondgError, ValueError):
    """Objects combined with incompatible dimensions."""


class NumericalFailure(MocondgError, ArithmeticError):
    """A subproblem solver could not meet its tolerances."""


class DegenerateMatrix(MocondgError, ArithmeticError):
    """A random uncertainty matrix kept failing the nonsingularity check."""


class DegenerateDirection(MocondgError, ArithmeticError):
    """The subproblem returned p == x together with a negative gap."""


class LineSearchStall(MocondgError, ArithmeticError):
    """The Armijo backtracking step underflowed."""


class UndefinedMetric(MocondgError, ValueError):
    """A frontier metric has no value for the given input."""


class IoFailure(MocondgError, OSError):
    """Result or report files could not be written."""
