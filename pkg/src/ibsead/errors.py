"""Exception types raised across the package."""


class IbseadError(Exception):
    """Base class for all package errors."""


# world

class EmptyGroup(IbseadError, ValueError):
    pass


class UnknownId(IbseadError, KeyError):
    pass


# learner

class GateClosed(IbseadError):
    """Raised when learning is attempted through a link whose gate is shut."""


# baselines

class EmptyDataset(IbseadError, ValueError):
    pass


class ArityMismatch(IbseadError, ValueError):
    pass


class EmptySequence(IbseadError, ValueError):
    pass


class SymbolOutOfRange(IbseadError, ValueError):
    pass


class InsufficientClassData(IbseadError, ValueError):
    pass


# bench

class ConfigError(IbseadError, ValueError):
    """Base for configuration errors; ``key`` names the offending entry."""

    def __init__(self, key, message=None):
        self.key = key
        super().__init__(message or f"{type(self).__name__}: {key!r}")


class UnknownLearner(ConfigError):
    pass


class UnknownScenario(ConfigError):
    pass


class InvalidConfig(ConfigError):
    pass


class EmptyReport(IbseadError, ValueError):
    pass
