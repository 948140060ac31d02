class MetawgError(Exception):
    """Base class for errors raised by this package."""


class DomainError(MetawgError, ValueError):
    """An argument lies outside the domain of the model."""


class InvalidParameterError(MetawgError, ValueError):
    """A parameter set is self-consistent but physically unusable (e.g. over-coupled)."""


class FitError(MetawgError, RuntimeError):
    """A fit failed to converge.

    The best parameters found so far are available as ``best`` together with
    solver diagnostics in ``info``.
    """

    def __init__(self, message, best=None, info=None):
        super().__init__(message)
        self.best = best
        self.info = info or {}
