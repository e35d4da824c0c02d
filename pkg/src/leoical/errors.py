"""Exception and warning types raised across the package."""


class LeoIcalError(Exception):
    """Base class for all package errors."""


class ConfigError(LeoIcalError, ValueError):
    pass


class DegenerateGeometry(LeoIcalError, ValueError):
    """UT coincides with the satellite or its AoD is undefined."""


class DomainError(LeoIcalError, ValueError):
    """Nadir angle is outside the visible cap of the orbit."""


class NonRealQuadraticForm(LeoIcalError, ArithmeticError):
    pass


class BisectionFailure(LeoIcalError, RuntimeError):
    pass


class SingularGram(LeoIcalError, ArithmeticError):
    pass


class SolverFailure(LeoIcalError, RuntimeError):
    pass


class MissingTrace(LeoIcalError, FileNotFoundError):
    pass


class RankDeficientWarning(UserWarning):
    pass


class NonConvergenceWarning(UserWarning):
    pass
