"""Exception hierarchy shared by every module."""


class SafegateError(Exception):
    """Base class for all package errors."""


class ContractError(SafegateError, ValueError):
    """An input violated a documented precondition or invariant."""


class InvalidDimensionError(ContractError):
    pass


class NumericFailureError(SafegateError, ArithmeticError):
    """A numerical decomposition lost the accuracy the caller relies on."""


class UncontrollableSystemError(SafegateError):
    """The control pair does not generate su(N)."""


class DegenerateInputError(ContractError):
    pass


class DegenerateModelError(SafegateError):
    """No controllable model could be drawn within the retry budget."""


class ProtectionFailure(SafegateError):
    """Waiting times could not cancel the first-order noise terms.

    The best residual found is kept on the exception so callers can decide
    whether to enlarge the sequence and retry.
    """

    def __init__(self, message, residual=None, tau=None):
        super().__init__(message)
        self.residual = residual
        self.tau = tau
