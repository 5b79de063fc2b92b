"""Exception hierarchy shared by all periodica modules."""


class PeriodicaError(Exception):
    """Base class for every error raised by this package."""


class InputError(PeriodicaError, ValueError):
    """Invalid user-supplied data or parameters (CLI exit code 2)."""


class MalformedRow(InputError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NonPositiveSigma(MalformedRow):
    pass


class DuplicateTime(MalformedRow):
    pass


class EmptyInput(InputError):
    pass


class LengthMismatch(InputError):
    pass


class NonPositivePeriod(InputError):
    pass


class BadRange(InputError):
    pass


class BadTolerance(InputError):
    pass


class TooLarge(InputError):
    pass


class SingularDesign(PeriodicaError, ArithmeticError):
    """The 3x3 normal matrix of the harmonic fit is numerically singular."""


class DegenerateBaseline(PeriodicaError, ArithmeticError):
    """All values are equal, so the periodogram normalisation vanishes."""


class ZeroMeanPower(PeriodicaError, ArithmeticError):
    pass
