"""Exception hierarchy shared by every module."""


class SqrtLassoError(Exception):
    """Base class for all errors raised by the package."""


class InvalidParameter(SqrtLassoError, ValueError):
    pass


class DimensionMismatch(SqrtLassoError, ValueError):
    pass


class IdenticallyZeroColumn(SqrtLassoError, ValueError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"design column {column} is identically zero")


class OutOfRange(SqrtLassoError, ValueError):
    pass


class ZeroResiduals(SqrtLassoError, ArithmeticError):
    """Residuals vanish, so a residual-normalized quantity is 0/0."""


class ZeroResidualFit(ZeroResiduals):
    pass


class ZeroCompositeError(ZeroResiduals):
    pass


class PenaltyTooLarge(SqrtLassoError, ArithmeticError):
    def __init__(self, column):
        self.column = column
        super().__init__(
            f"penalty for column {column} exceeds n * sqrt(E_n[x_j^2]); "
            "closed-form update undefined"
        )


class NotConverged(SqrtLassoError, RuntimeError):
    def __init__(self, message, result=None):
        self.result = result
        super().__init__(message)


class EnumerationTooLarge(SqrtLassoError, ValueError):
    def __init__(self, count, limit):
        self.count = count
        self.limit = limit
        super().__init__(
            f"{count} supports exceed the enumeration limit {limit}; "
            "pass randomized=True to subsample supports"
        )


class EmptySupport(SqrtLassoError, ValueError):
    pass
