"""Exception types raised by radnls."""


class RadNLSError(Exception):
    """Base class for all package errors."""


class InvalidArgument(RadNLSError, ValueError):
    pass


class UnsupportedExponent(InvalidArgument):
    pass


class UndefinedRatio(RadNLSError, ArithmeticError):
    pass


class BracketFailure(RadNLSError):
    pass


class ToleranceUnreachable(InvalidArgument):
    pass


class NotRescalable(RadNLSError):
    pass


class UndefinedMargin(UndefinedRatio):
    pass


class SolverFailure(RadNLSError):
    pass


class WeightOverflow(InvalidArgument):
    pass


class EstimateNotApplicable(RadNLSError):
    pass


class InsufficientData(RadNLSError):
    pass


class ConfigError(InvalidArgument):
    pass
