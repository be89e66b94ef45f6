"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`BukhgeimError`, so callers (and the CLI) can map failures to exit
codes without catching unrelated bugs.
"""


class BukhgeimError(Exception):
    """Base class for all package errors."""


class GridError(BukhgeimError, ValueError):
    pass


class OddGridSize(GridError):
    pass


class GridMismatch(GridError):
    pass


class NonFiniteSample(BukhgeimError, ValueError):
    pass


class SupportTooClose(BukhgeimError, ValueError):
    """A field does not vanish in the safety margin next to the grid frame."""


class VanishingConductivity(BukhgeimError, ValueError):
    pass


class BranchAmbiguity(BukhgeimError, ValueError):
    """log(gamma) cannot be continued as a single-valued function."""


class NonDecayingSolution(BukhgeimError, ValueError):
    pass


class SolverError(BukhgeimError, RuntimeError):
    """Base for fixed-point / Neumann-series failures."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals or [])


class NotContractive(SolverError):
    pass


class MaxIterations(SolverError):
    pass


class NotConverged(BukhgeimError, ValueError):
    pass


class ExponentialOverflow(BukhgeimError, OverflowError):
    def __init__(self, exponent):
        super().__init__(f"exponent {exponent:.1f} exceeds the overflow budget")
        self.exponent = exponent


class ContourTooTight(BukhgeimError, ValueError):
    pass


class SupportNotCovered(BukhgeimError, ValueError):
    pass


class PartialDataset(BukhgeimError, ValueError):
    pass


class ConfigError(BukhgeimError, ValueError):
    pass
