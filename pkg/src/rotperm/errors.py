"""Exception types shared across modules."""


class StatisticError(RuntimeError):
    """A test statistic could not be computed on a given sample."""


class DegenerateSampleError(StatisticError, ValueError):
    pass


class BasisDomainError(StatisticError, ValueError):
    pass


class ProfileFitError(StatisticError):
    pass


class PercentileRangeError(StatisticError):
    pass


class ConvexHullError(StatisticError):
    pass


class SolverDivergedError(StatisticError):
    pass
