"""Exception and warning types raised by the package."""


class UnitarityError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(UnitarityError, ValueError):
    """Input data does not describe a valid object."""


class DimensionMismatch(ValidationError):
    pass


class DimensionTooSmall(ValidationError):
    pass


class NotTraceNonincreasing(ValidationError):
    """``sum_i E_i^dag E_i`` has an eigenvalue above ``1 + tol``."""

    def __init__(self, max_eigenvalue: float, tol: float):
        self.max_eigenvalue = max_eigenvalue
        self.tol = tol
        super().__init__(
            f"Kraus operators are not trace-nonincreasing: largest eigenvalue of "
            f"sum E^dag E is {max_eigenvalue:.12g} (> 1 + {tol:g})"
        )


class NumericalNegativeProbability(ValidationError):
    pass


class EmptyBatch(ValidationError):
    pass


class EmptyList(ValidationError):
    pass


class UnknownBuiltin(ValidationError):
    pass


class BadParams(ValidationError):
    pass


class ParseError(UnitarityError):
    """A channel or config file could not be parsed."""


class IoError(UnitarityError, OSError):
    """Reading a channel file or writing a result file failed."""


class DegenerateChannelWarning(UserWarning):
    """The channel is (numerically) zero; a fallback was used."""
