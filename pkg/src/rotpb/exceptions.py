"""Exception hierarchy shared by the solver modules."""


class RotpbError(Exception):
    """Base class for all errors raised by this package."""


class InvalidMeasureError(RotpbError, ValueError):
    pass


class InvalidPathError(RotpbError, ValueError):
    pass


class InvalidParameterError(RotpbError, ValueError):
    pass


class PayoffDomainError(RotpbError, ValueError):
    pass


class NotAcyclicError(RotpbError, ValueError):
    pass


class BalanceError(RotpbError, ValueError):
    pass


class BoundInapplicableError(RotpbError, ValueError):
    pass


class OracleTooLargeError(RotpbError):
    pass


class UnsupportedInputError(RotpbError, ValueError):
    pass


class StructureViolationError(RotpbError):
    pass


class GridTooShortError(RotpbError):
    pass


class ConvergenceError(RotpbError):
    """Relaxation did not reach the requested tolerance.

    The best iterate found is kept on ``best`` so callers can still use it.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best
