"""Exception hierarchy shared by all modules."""


class McqrError(Exception):
    """Base class for library errors."""


class InvalidMatrix(McqrError, ValueError):
    pass


class DimensionError(McqrError, ValueError):
    pass


class NotPositiveDefinite(McqrError, ValueError):
    pass


class InvalidConfig(McqrError, ValueError):
    pass


class DomainError(McqrError, ValueError):
    pass


class EmptyInput(McqrError, ValueError):
    pass


class RankDeficient(McqrError, ValueError):
    pass


class DegenerateInput(McqrError, ValueError):
    """Covariates carry no information (e.g. a constant column)."""


class SolverStalled(McqrError, RuntimeError):
    pass


class Infeasible(McqrError, RuntimeError):
    pass


class DualRecoveryFailed(McqrError, RuntimeError):
    """Recovered coefficients do not reproduce the LP optimum."""


class IoError(McqrError, OSError):
    pass
