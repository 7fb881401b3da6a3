"""Exception hierarchy shared by all modules."""


class LissagraphError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(LissagraphError, ValueError):
    """Invalid graph, path or run configuration."""


class NonPositiveLength(ConfigError):
    pass


class NotCoprime(ConfigError):
    pass


class DisconnectedGraph(ConfigError):
    pass


class LoopEdge(ConfigError):
    pass


class WrongDimension(ConfigError):
    pass


class IndexingError(ConfigError):
    pass


class NumericalError(LissagraphError, ArithmeticError):
    """A numerical procedure could not produce a trustworthy answer.

    ``tau`` and ``level`` locate the failure when known.
    """

    def __init__(self, message, tau=None, level=None):
        super().__init__(message)
        self.tau = tau
        self.level = level

    def to_dict(self):
        return {
            "error": type(self).__name__,
            "message": str(self),
            "tau": self.tau,
            "level": self.level,
        }


class DegenerateSpectrum(NumericalError):
    pass


class TrackingLost(NumericalError):
    pass


class NearNode(NumericalError):
    pass


class InsufficientSamples(NumericalError):
    pass


class NoIntegerFit(NumericalError):
    pass


class CFLWarning(UserWarning):
    """Time step is coarse relative to the tracked level's phase rotation."""
