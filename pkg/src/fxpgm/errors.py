"""Exception hierarchy shared by all fxpgm modules."""


class FxpgmError(Exception):
    """Base class for every error raised by this package."""


class FxOverflow(FxpgmError, ArithmeticError):
    """A fixed-point result does not fit in the integer bits of its format.

    ``witness`` optionally carries the input assignment that triggered it.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class Underflow(FxpgmError, ArithmeticError):
    pass


class NonSymmetric(FxpgmError, ValueError):
    pass


class NotPositiveDefinite(FxpgmError, ValueError):
    pass


class DimensionMismatch(FxpgmError, ValueError):
    pass


class IterationLimit(FxpgmError, RuntimeError):
    pass


class Divergence(FxpgmError, RuntimeError):
    pass


class SearchSpaceTooLarge(FxpgmError, RuntimeError):
    pass


class BackendInconclusive(FxpgmError, RuntimeError):
    pass


class InvalidRange(FxpgmError, ValueError):
    pass


class PreconditionViolated(FxpgmError, ValueError):
    pass
