"""Exception types raised across the package."""


class NicolaiError(Exception):
    """Base class for all package errors."""


class NonHomogeneousArgument(NicolaiError, ValueError):
    pass


class EmptySupport(NicolaiError, ValueError):
    pass


class BadRegionParity(NicolaiError, ValueError):
    pass


class ZeroCoupling(NicolaiError, ValueError):
    pass


class SupportOutsideWindow(NicolaiError, ValueError):
    pass


class WindowMismatch(NicolaiError, ValueError):
    pass


class WindowTooLarge(NicolaiError, ValueError):
    pass


class IterationDivergence(NicolaiError, RuntimeError):
    """Power iteration did not reach its tolerance.

    ``estimate`` holds the best value found before giving up.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class SolverNoConvergence(NicolaiError, RuntimeError):
    pass


class NotNumberConserving(NicolaiError, ValueError):
    pass


class EmptyInput(NicolaiError, ValueError):
    pass


class ConfigParse(NicolaiError, ValueError):
    pass
