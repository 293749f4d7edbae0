"""Exception hierarchy shared by all modules."""


class BNReduceError(Exception):
    """Base class for every error raised by bnreduce."""


class CoincidentPoints(BNReduceError, ValueError):
    pass


class OutsideDomain(BNReduceError, ValueError):
    pass


class ProviderNotBuilt(BNReduceError, RuntimeError):
    pass


class ProviderBuildError(BNReduceError, RuntimeError):
    """Fitted Green provider missed its boundary-residual tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ExponentOutOfRange(BNReduceError, ValueError):
    pass


class NonSimpleLowest(BNReduceError, ArithmeticError):
    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class NotPositiveDefinite(BNReduceError, ArithmeticError):
    pass


class NoConvergence(BNReduceError, RuntimeError):
    """Iteration stopped without meeting its tolerance.

    ``trace`` holds whatever history the raising routine recorded.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []


class LeftDomain(NoConvergence):
    """Newton iterates were pushed out of the feasible set."""


class QuadratureNotConverged(BNReduceError, ArithmeticError):
    pass


class StepUnderflow(BNReduceError, ArithmeticError):
    pass


class NoSolution(BNReduceError, RuntimeError):
    pass


class InsufficientData(BNReduceError, ValueError):
    pass


class PreconditionError(BNReduceError, ValueError):
    pass


class ConfigError(BNReduceError, ValueError):
    """Invalid run configuration; ``key`` and ``line`` locate the problem."""

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.key = key
        self.line = line
