"""Exception hierarchy."""


class BanditExpansionError(Exception):
    """Base class for all package errors."""


class ParameterDomainError(BanditExpansionError, ValueError):
    pass


class InfeasibleDesignError(BanditExpansionError, ValueError):
    pass


class DegenerateDesignError(BanditExpansionError, ValueError):
    """An arm received no subjects."""


class DegenerateVarianceError(BanditExpansionError, ArithmeticError):
    """Residual variance is zero, so the studentized statistic is undefined."""


class ExpansionDegenerateError(BanditExpansionError, ArithmeticError):
    """Stage covariance is singular or not positive definite."""


class BracketError(BanditExpansionError, ValueError):
    def __init__(self, message, lo=None, hi=None, f_lo=None, f_hi=None):
        super().__init__(message)
        self.lo, self.hi, self.f_lo, self.f_hi = lo, hi, f_lo, f_hi


class ConfigError(BanditExpansionError, ValueError):
    def __init__(self, message, keys=()):
        super().__init__(message)
        self.keys = tuple(keys)
