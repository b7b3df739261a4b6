"""Exception types raised by the solver stack."""


class BJBDError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(BJBDError, ValueError):
    """Shapes or partition totals do not agree."""


class DegenerateInputError(BJBDError, ValueError):
    """A matrix that must have full column rank does not."""


class PreconditionError(BJBDError, ValueError):
    """An input violates a documented precondition."""


class RankUndetectableError(BJBDError):
    """No index of the singular spectrum passes the gap test.

    The full spectrum is attached as ``spectrum``.
    """

    def __init__(self, message, spectrum=None):
        super().__init__(message)
        self.spectrum = spectrum


class AmbiguousThresholdError(BJBDError):
    """The null-space threshold coincides with a singular value."""


class ConvergenceError(BJBDError):
    """The power iteration failed on every restart.

    The best iterate found is attached as ``best``.
    """

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class NoReliableSplitError(BJBDError):
    """The eigenvalues of X* do not separate into two clusters."""


class SplitUnstableError(BJBDError):
    """The Sylvester equation decoupling the two clusters is near-singular."""


class IllConditionedError(BJBDError):
    """A block diagonalizer is too ill conditioned to apply.

    A snapshot of the solver state is attached as ``state``.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
