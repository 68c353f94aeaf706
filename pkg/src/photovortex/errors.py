"""Exception types raised by photovortex."""


class VortexError(Exception):
    """Base class for all photovortex errors."""


class InvalidArgumentError(VortexError, ValueError):
    pass


class NumericalDomainError(VortexError, ArithmeticError):
    pass


class IllConditionedBasisError(VortexError):
    pass


class StalledSolverError(VortexError):
    pass


class DegenerateBoundError(VortexError, ZeroDivisionError):
    pass


class InsufficientTailError(VortexError):
    pass


class UndefinedRatioError(VortexError, ZeroDivisionError):
    pass
