"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class NotPositiveDefiniteError(InvalidInputError):
    """A matrix required to be positive definite is not."""


class NotPSDError(InvalidInputError):
    """A matrix required to be positive semidefinite is not."""


class RankDeficientError(InvalidInputError):
    """A matrix required to have full rank is rank deficient."""


class UnsupportedError(ValueError):
    """A requested combination of options is outside the supported set."""


class ProtocolViolationError(RuntimeError):
    """An ask/tell style protocol was driven out of order."""
