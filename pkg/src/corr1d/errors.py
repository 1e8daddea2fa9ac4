"""Exception types raised by the simulation modules."""


class Corr1dError(Exception):
    """Base class for all package errors."""


class SingularSystem(Corr1dError):
    """The coupled-dipole linear system could not be solved accurately."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class GridTooClose(Corr1dError):
    pass


class SingularAtomMatrix(Corr1dError):
    """A lossless atom driven exactly on resonance has no finite transfer matrix."""


class NoTransmissionSolution(Corr1dError):
    pass


class ResonantDivergence(Corr1dError):
    pass


class NonconvergentSeries(Corr1dError):
    pass


class QuadratureFailure(Corr1dError):
    pass


class MftVanishes(Corr1dError):
    pass


class ChainNotEquilibrated(Corr1dError):
    pass


class PeakAtBoundary(Corr1dError):
    pass


class GridMismatch(Corr1dError):
    pass


class ConfigError(Corr1dError):
    """Invalid run configuration. ``key`` names the offending entry when known."""

    def __init__(self, message, key=None, line=None):
        super().__init__(message)
        self.key = key
        self.line = line

    def __str__(self):
        where = []
        if self.line is not None:
            where.append(f"line {self.line}")
        if self.key is not None:
            where.append(f"key '{self.key}'")
        prefix = f"[{', '.join(where)}] " if where else ""
        return prefix + super().__str__()


class RunFailure(Corr1dError):
    """An experiment could not be completed; ``seed`` and ``realization`` locate
    the offending Monte Carlo draw when one is to blame."""

    def __init__(self, message, seed=None, realization=None):
        super().__init__(message)
        self.seed = seed
        self.realization = realization
